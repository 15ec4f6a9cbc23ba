//! `marktop`: node/bound queries, scalar error scans, matrix-function runs and
//! Toeplitz matrix generation.

mod experiment;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use experiment::{Case, ExperimentConfig, MatrixSource};
use marktop::approx::{bound_report, optimal_nodes};
use marktop::gen::{kms, laplacian1d, random_spd_toeplitz};
use marktop::{build_geometry, Error, MarkovSpec, RepKind};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "marktop", version, about = "Markov functions of SPD Toeplitz matrices by rational interpolation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the optimal nodes for [c,d] and the associated bounds.
    Nodes(NodesArgs),
    /// Scalar relative errors on cosine points of [c,d], one CSV row per (representation, m).
    Scan(ScanArgs),
    /// Matrix-function runs with automatic degree selection, one CSV row per (case, representation, m).
    Matfun(MatfunArgs),
    /// Write a Toeplitz matrix file.
    Gen(GenArgs),
}

#[derive(Args)]
struct NodesArgs {
    #[arg(long, allow_hyphen_values = true, default_value = "-inf")]
    alpha: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, allow_hyphen_values = true)]
    c: f64,
    #[arg(long, allow_hyphen_values = true)]
    d: f64,
    #[arg(long)]
    m: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum FunctionKind {
    InvSqrt,
    LogRatio,
    Power,
    WorstCase,
}

#[derive(Args)]
struct FunctionArgs {
    /// Markov function.
    #[arg(long, value_enum, default_value = "inv-sqrt")]
    function: FunctionKind,
    /// Exponent for `power`, in [-1, 0).
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Left support end for `worst-case` (the right end is 0).
    #[arg(long, allow_hyphen_values = true, default_value = "-inf")]
    alpha: f64,
}

impl FunctionArgs {
    fn spec(&self) -> Result<MarkovSpec, CliError> {
        let spec = match self.function {
            FunctionKind::InvSqrt => Ok(MarkovSpec::inv_sqrt()),
            FunctionKind::LogRatio => Ok(MarkovSpec::log_over_zm1()),
            FunctionKind::Power => {
                MarkovSpec::power(self.gamma.ok_or_else(|| CliError::Config("--function power needs --gamma".into()))?)
            }
            FunctionKind::WorstCase => MarkovSpec::worst_case(self.alpha, 0.0),
        };
        spec.map_err(CliError::from)
    }
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    function: FunctionArgs,
    #[arg(long, allow_hyphen_values = true)]
    c: f64,
    #[arg(long, allow_hyphen_values = true)]
    d: f64,
    #[arg(long, default_value_t = 1)]
    m_min: usize,
    #[arg(long, default_value_t = 30)]
    m_max: usize,
    /// Comma-separated subset of pfd, bary, thiele.
    #[arg(long, value_delimiter = ',', default_value = "pfd,bary,thiele")]
    reps: Vec<RepKind>,
    #[arg(long, default_value_t = 500)]
    points: usize,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceKind {
    File,
    Random,
    DiagonalCosine,
    Laplacian1d,
}

#[derive(Args)]
struct MatfunArgs {
    #[command(flatten)]
    function: FunctionArgs,
    #[arg(long, value_enum, default_value = "random")]
    matrix: SourceKind,
    /// Toeplitz file for `--matrix file`.
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    lmin: f64,
    #[arg(long, default_value_t = 120.0)]
    lmax: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Spectral interval of `--matrix diagonal-cosine`.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    /// Comma-separated subset of i, ii, iii, iv.
    #[arg(long = "case", value_delimiter = ',', default_value = "i")]
    cases: Vec<Case>,
    #[arg(long, value_delimiter = ',', default_value = "pfd,bary,thiele")]
    reps: Vec<RepKind>,
    #[arg(long, default_value_t = 40)]
    m_max: usize,
    /// Keep evaluating degrees after the stopping rule triggers.
    #[arg(long)]
    full_history: bool,
    /// Skip the dense reference solution (leaves rel_err empty).
    #[arg(long)]
    no_oracle: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Random,
    Laplacian1d,
    Kms,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "random")]
    kind: GenKind,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    lmin: f64,
    #[arg(long, default_value_t = 120.0)]
    lmax: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Decay ratio for `kms`.
    #[arg(long, default_value_t = 0.5)]
    r: f64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInterval(_)
            | Error::InvalidParameter(_)
            | Error::DegenerateCondenser
            | Error::Domain { .. }
            | Error::Dimension(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn cmd_nodes(a: &NodesArgs) -> Result<(), CliError> {
    let g = build_geometry(a.alpha, a.beta, a.c, a.d)?;
    let nodes = optimal_nodes(&g, a.m)?;
    let rep = bound_report(&g, &nodes)?;
    let two_rho = 2.0 * g.rho.powi(2 * a.m as i32);
    println!("m = {}", a.m);
    println!("rho = {:e}", g.rho);
    println!("nodes = {}", nodes.nodes.iter().map(|z| format!("{z:e}")).collect::<Vec<_>>().join(" "));
    println!("eta = {:e}", rep.eta);
    println!("lambda^2m = {:e}", rep.rate_single);
    println!("2rho^2m = {two_rho:e}");
    match rep.apriori {
        Some(b) => println!("apriori = {b:e}"),
        None => println!("apriori = invalid"),
    }
    Ok(())
}

fn cmd_scan(a: &ScanArgs) -> Result<(), CliError> {
    let spec = a.function.spec()?;
    if a.m_min == 0 || a.m_min > a.m_max {
        return Err(CliError::Config(format!("need 1 <= m-min <= m-max, got {}..{}", a.m_min, a.m_max)));
    }
    let g = build_geometry(spec.alpha(), spec.beta(), a.c, a.d)?;
    let rows = experiment::scan(&spec, &g, &a.reps, a.m_max, a.points)?;
    let rows: Vec<_> = rows.into_iter().filter(|r| r.m >= a.m_min).collect();
    output::write_rows(a.output.as_deref(), &rows)
}

fn cmd_matfun(a: &MatfunArgs) -> Result<(), CliError> {
    let spec = a.function.spec()?;
    let source = match a.matrix {
        SourceKind::File => MatrixSource::File(
            a.file.clone().ok_or_else(|| CliError::Config("--matrix file needs --file".into()))?,
        ),
        SourceKind::Random => MatrixSource::Random { n: a.n, lmin: a.lmin, lmax: a.lmax, seed: a.seed },
        SourceKind::DiagonalCosine => MatrixSource::DiagonalCosine {
            n: a.n,
            c: a.c.ok_or_else(|| CliError::Config("--matrix diagonal-cosine needs --c and --d".into()))?,
            d: a.d.ok_or_else(|| CliError::Config("--matrix diagonal-cosine needs --c and --d".into()))?,
        },
        SourceKind::Laplacian1d => MatrixSource::Laplacian1d { n: a.n },
    };
    let config = ExperimentConfig {
        spec,
        source,
        cases: a.cases.clone(),
        reps: a.reps.clone(),
        m_max: a.m_max,
        full_history: a.full_history,
        oracle: !a.no_oracle,
        threads: experiment::thread_cap()?,
    };
    let rows = experiment::run(&config)?;
    output::write_rows(a.output.as_deref(), &rows)
}

fn cmd_gen(a: &GenArgs) -> Result<(), CliError> {
    let t = match a.kind {
        GenKind::Random => random_spd_toeplitz(a.n, a.lmin, a.lmax, a.seed)?,
        GenKind::Laplacian1d => laplacian1d(a.n)?,
        GenKind::Kms => kms(a.n, a.r)?,
    };
    output::write_toeplitz(a.output.as_deref(), &t)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Nodes(a) => cmd_nodes(a),
        Command::Scan(a) => cmd_scan(a),
        Command::Matfun(a) => cmd_matfun(a),
        Command::Gen(a) => cmd_gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
