//! CSV and matrix file output.

use crate::experiment::ExperimentRow;
use crate::CliError;
use marktop::ToeplitzInput;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

pub const CSV_HEADER: &str = "case,rep,m,rel_err,apriori,residual,accepted,tau,wall_ms";

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn sci(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn write_rows(path: Option<&Path>, rows: &[ExperimentRow]) -> Result<(), CliError> {
    let mut w = sink(path)?;
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{:e},{},{},{:.3}",
            r.case,
            r.rep,
            r.m,
            sci(r.rel_err),
            sci(r.apriori),
            r.residual,
            r.accepted,
            r.tau.map(|t| t.to_string()).unwrap_or_default(),
            r.wall_ms
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_toeplitz(path: Option<&Path>, t: &ToeplitzInput) -> Result<(), CliError> {
    let mut w = sink(path)?;
    t.write(&mut w)?;
    w.flush()?;
    Ok(())
}
