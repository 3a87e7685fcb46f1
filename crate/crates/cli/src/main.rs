//! `opcalc`: run the jobs of a spec file and write `results.csv` and `timing.csv`.
//!
//! Exit status: 0 when every job passed, 1 when a job failed or errored,
//! 2 when the spec (or the command line) could not be parsed.

mod jobs;
mod spec;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use rayon::prelude::*;

use jobs::{run_job, Row, Settings};

#[derive(Debug, Parser)]
#[command(name = "opcalc", version, about = "Batch checks for the operator calculus on the circle")]
struct Args {
    /// Spec file to run.
    #[arg(long)]
    spec: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "opcalc-out")]
    out: PathBuf,
    /// Mode cutoff N for matrix realizations.
    #[arg(long, default_value_t = 128)]
    modes: usize,
    /// Symbol depth for products and continuations.
    #[arg(long, default_value_t = 12)]
    depth: usize,
    /// Quadrature size for composition matrices (default: 8N, at least 64).
    #[arg(long)]
    quadrature: Option<usize>,
    /// Bound on the oracle delta of every job (default depends on the operation).
    #[arg(long)]
    tolerance: Option<f64>,
    /// Seed for `random` symbols.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

const HEADER: [&str; 10] =
    ["job_id", "operation", "inputs_hash", "status", "value_re", "value_im", "aux", "oracle_delta", "convention", "seed"];

fn write_reports(out: &Path, rows: &[Row]) -> Result<(), Box<dyn std::error::Error>> {
    std::fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("results.csv"))?;
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.job_id.clone(),
            r.operation.to_string(),
            r.inputs_hash.clone(),
            r.status.to_string(),
            format!("{:?}", r.value.0),
            format!("{:?}", r.value.1),
            r.aux.clone(),
            r.oracle_delta.map(|d| format!("{d:?}")).unwrap_or_default(),
            r.convention.clone(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    // Wall time is kept apart so that results.csv is reproducible byte for byte.
    let mut t = csv::Writer::from_path(out.join("timing.csv"))?;
    t.write_record(["job_id", "seconds"])?;
    for r in rows {
        t.write_record([r.job_id.clone(), format!("{:.6}", r.seconds)])?;
    }
    t.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let text = match std::fs::read_to_string(&args.spec) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("opcalc: cannot read {}: {e}", args.spec.display());
            return ExitCode::from(2);
        }
    };
    let base = args.spec.parent().unwrap_or(Path::new("."));
    let spec = match spec::parse(&text, base) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("opcalc: {}: {e}", args.spec.display());
            return ExitCode::from(2);
        }
    };
    let settings = Settings {
        modes: args.modes,
        depth: args.depth,
        quadrature: args.quadrature,
        tolerance: args.tolerance,
        seed: args.seed,
    };
    // Jobs run in parallel; collecting an indexed iterator keeps declaration order.
    let rows: Vec<Row> = spec.jobs.par_iter().map(|j| run_job(&spec, j, &settings)).collect();
    if let Err(e) = write_reports(&args.out, &rows) {
        eprintln!("opcalc: cannot write reports to {}: {e}", args.out.display());
        return ExitCode::from(1);
    }
    let failed: Vec<&Row> = rows.iter().filter(|r| r.failed()).collect();
    for r in &failed {
        eprintln!("opcalc: job {} {}: {}", r.job_id, r.status, r.aux);
    }
    eprintln!("opcalc: {} job(s), {} failed", rows.len(), failed.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
