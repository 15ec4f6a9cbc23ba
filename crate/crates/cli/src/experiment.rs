//! Experiment configuration and execution for `scan` and `matfun`.

use crate::CliError;
use clap::ValueEnum;
use marktop::gen::{extreme_eigenvalues, laplacian1d, laplacian1d_extremes, random_spd_toeplitz};
use marktop::interp::cosine_points;
use marktop::matfun::{auto_degree_with, AutoDegreeOptions, DegreeStep};
use marktop::oracle::{rel_err_dense, rel_err_diagonal, sym_eig, ORACLE_MAX_N};
use marktop::{build_geometry, Geometry, MarkovSpec, MatArg, RepKind, TLMatrix, ToeplitzInput};
use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub const THREADS_ENV: &str = "MARKTOP_THREADS";

/// The four experiment settings: Toeplitz-like arithmetic on `[λmin, λmax]` (i) or on
/// `[λmin/2, 2λmax]` (ii), dense arithmetic (iii), and the diagonal of eigenvalues (iv).
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Case {
    #[value(name = "i")]
    I,
    #[value(name = "ii")]
    II,
    #[value(name = "iii")]
    III,
    #[value(name = "iv")]
    IV,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::I => "i",
            Case::II => "ii",
            Case::III => "iii",
            Case::IV => "iv",
        })
    }
}

#[derive(Clone, Debug)]
pub enum MatrixSource {
    File(PathBuf),
    Random { n: usize, lmin: f64, lmax: f64, seed: u64 },
    DiagonalCosine { n: usize, c: f64, d: f64 },
    Laplacian1d { n: usize },
}

pub struct ExperimentConfig {
    pub spec: MarkovSpec,
    pub source: MatrixSource,
    pub cases: Vec<Case>,
    pub reps: Vec<RepKind>,
    pub m_max: usize,
    pub full_history: bool,
    pub oracle: bool,
    pub threads: usize,
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRow {
    pub case: String,
    pub rep: RepKind,
    pub m: usize,
    pub rel_err: Option<f64>,
    pub apriori: Option<f64>,
    pub residual: f64,
    pub accepted: bool,
    pub tau: Option<usize>,
    pub wall_ms: f64,
}

impl ExperimentRow {
    fn from_step(case: &str, rep: RepKind, s: &DegreeStep) -> Self {
        ExperimentRow {
            case: case.to_string(),
            rep,
            m: s.m,
            rel_err: s.rel_err,
            apriori: s.apriori,
            residual: s.residual,
            accepted: s.accepted,
            tau: s.tau,
            wall_ms: s.wall_ms,
        }
    }
}

/// Worker cap from `MARKTOP_THREADS`, else the available parallelism.
pub fn thread_cap() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k >= 1 => Ok(k),
            _ => Err(CliError::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |k| k.get())),
    }
}

/// Runs `jobs` on at most `threads` workers; results keep the job order.
fn run_parallel<T: Send>(
    count: usize,
    threads: usize,
    job: impl Fn(usize) -> Result<T, CliError> + Sync,
) -> Result<Vec<T>, CliError> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<T, CliError>>>> = Mutex::new((0..count).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, count.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let r = job(i);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every job ran")).collect()
}

/// Scalar error curves: the diagonal matrix of `points` cosine points of `[c, d]`.
pub fn scan(
    spec: &MarkovSpec,
    g: &Geometry,
    reps: &[RepKind],
    m_max: usize,
    points: usize,
) -> Result<Vec<ExperimentRow>, CliError> {
    if points == 0 {
        return Err(CliError::Config("--points must be positive".into()));
    }
    let grid = cosine_points(g.c, g.d, points);
    let a = MatArg::Diagonal(grid.clone());
    let f = |x: f64| spec.eval(x).unwrap_or(f64::NAN);
    let observer = |r: &MatArg| -> marktop::Result<f64> {
        match r {
            MatArg::Diagonal(v) => Ok(rel_err_diagonal(v, &grid, f)),
            _ => unreachable!("diagonal arguments give diagonal results"),
        }
    };
    let mut rows = Vec::new();
    for &rep in reps {
        let opts = AutoDegreeOptions { m_max, continue_after_trigger: true, observer: Some(&observer), ..Default::default() };
        let res = auto_degree_with(spec, &a, g, rep, &opts)?;
        rows.extend(res.history.iter().map(|s| ExperimentRow::from_step("scalar", rep, s)));
    }
    Ok(rows)
}

enum Loaded {
    Toeplitz { t: ToeplitzInput, c: f64, d: f64 },
    Diagonal(Vec<f64>),
}

fn load(source: &MatrixSource) -> Result<Loaded, CliError> {
    let toeplitz = |t: ToeplitzInput| -> Result<Loaded, CliError> {
        let (c, d) = extreme_eigenvalues(&t)?;
        if !(c > 0.0) {
            return Err(CliError::Config(format!("matrix is not positive definite (smallest eigenvalue {c})")));
        }
        Ok(Loaded::Toeplitz { t, c, d })
    };
    match source {
        MatrixSource::File(p) => {
            let file = File::open(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            toeplitz(ToeplitzInput::read(BufReader::new(file))?)
        }
        MatrixSource::Random { n, lmin, lmax, seed } => toeplitz(random_spd_toeplitz(*n, *lmin, *lmax, *seed)?),
        MatrixSource::Laplacian1d { n } => {
            let (c, d) = laplacian1d_extremes(*n);
            Ok(Loaded::Toeplitz { t: laplacian1d(*n)?, c, d })
        }
        MatrixSource::DiagonalCosine { n, c, d } => {
            if *n == 0 || !(*c > 0.0 && c < d) {
                return Err(CliError::Config(format!("need n >= 1 and 0 < c < d, got n={n}, [{c}, {d}]")));
            }
            Ok(Loaded::Diagonal(cosine_points(*c, *d, *n)))
        }
    }
}

struct Prepared {
    case: Case,
    arg: MatArg,
    geometry: Geometry,
}

/// Runs every (case, representation) pair; rows come out grouped in that order.
pub fn run(config: &ExperimentConfig) -> Result<Vec<ExperimentRow>, CliError> {
    if config.cases.is_empty() || config.reps.is_empty() {
        return Err(CliError::Config("at least one case and one representation are required".into()));
    }
    let loaded = load(&config.source)?;
    let spec = &config.spec;
    let n = match &loaded {
        Loaded::Toeplitz { t, .. } => t.n(),
        Loaded::Diagonal(v) => v.len(),
    };
    let dense = match &loaded {
        Loaded::Toeplitz { t, .. } if config.oracle || config.cases.iter().any(|c| matches!(c, Case::III | Case::IV)) => {
            if n > ORACLE_MAX_N {
                return Err(CliError::Runtime(format!(
                    "dense reference limited to n <= {ORACLE_MAX_N}, got n = {n}; use --no-oracle with cases i/ii"
                )));
            }
            Some(t.dense())
        }
        _ => None,
    };
    let eigenvalues = match (&loaded, &dense) {
        (Loaded::Diagonal(v), _) => Some(v.clone()),
        (_, Some(a)) if config.cases.contains(&Case::IV) => Some(sym_eig(a)?.0),
        _ => None,
    };
    let mut prepared = Vec::new();
    for &case in &config.cases {
        let (arg, c, d) = match (&loaded, case) {
            (Loaded::Toeplitz { t, c, d }, Case::I) => (MatArg::Toeplitz(TLMatrix::from_toeplitz(t)?), *c, *d),
            (Loaded::Toeplitz { t, c, d }, Case::II) => (MatArg::Toeplitz(TLMatrix::from_toeplitz(t)?), c / 2.0, 2.0 * d),
            (Loaded::Toeplitz { c, d, .. }, Case::III) => (MatArg::Dense(dense.clone().expect("dense matrix")), *c, *d),
            (Loaded::Toeplitz { c, d, .. }, Case::IV) => (MatArg::Diagonal(eigenvalues.clone().expect("spectrum")), *c, *d),
            (Loaded::Diagonal(v), Case::IV) => {
                let (c, d) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
                (MatArg::Diagonal(v.clone()), c, d)
            }
            (Loaded::Diagonal(_), _) => {
                return Err(CliError::Config(format!("a diagonal-cosine matrix supports case iv only, got case {case}")))
            }
        };
        let geometry = build_geometry(spec.alpha(), spec.beta(), c, d)?;
        prepared.push(Prepared { case, arg, geometry });
    }
    let jobs: Vec<(usize, RepKind)> =
        (0..prepared.len()).flat_map(|p| config.reps.iter().map(move |&r| (p, r))).collect();
    let f = |x: f64| spec.eval(x).unwrap_or(f64::NAN);
    let results = run_parallel(jobs.len(), config.threads, |j| {
        let (p, rep) = jobs[j];
        let job = &prepared[p];
        let observer = |r: &MatArg| -> marktop::Result<f64> {
            match (r, &dense) {
                (MatArg::Diagonal(v), _) => Ok(rel_err_diagonal(v, eigenvalues.as_deref().expect("spectrum"), f)),
                (_, Some(a)) => rel_err_dense(&r.to_dense(), a, f),
                (_, None) => unreachable!("the dense matrix exists whenever the oracle is on"),
            }
        };
        let opts = AutoDegreeOptions {
            m_max: config.m_max,
            continue_after_trigger: config.full_history,
            observer: if config.oracle { Some(&observer) } else { None },
            ..Default::default()
        };
        let res = auto_degree_with(spec, &job.arg, &job.geometry, rep, &opts)?;
        let case = job.case.to_string();
        Ok(res.history.iter().map(|s| ExperimentRow::from_step(&case, rep, s)).collect::<Vec<_>>())
    })?;
    Ok(results.into_iter().flatten().collect())
}

