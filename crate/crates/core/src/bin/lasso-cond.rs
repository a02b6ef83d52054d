use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lasso_condition::runner::{run_from_path, Overrides};

/// Runs one LASSO conditioning experiment described by a JSON config.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// Experiment config (see schema/experiment-config.schema.json).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the Monte Carlo loops.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let ov = Overrides {
        seed: args.seed,
        workers: args.workers,
        out: args.out,
    };
    ExitCode::from(run_from_path(&args.config, &ov) as u8)
}
