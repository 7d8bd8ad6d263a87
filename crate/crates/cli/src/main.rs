mod bench;
mod btb;
mod error;
mod options;
mod output;
mod report;
mod score;

use std::process::ExitCode;

use clap::Parser;

use crate::error::CliError;
use crate::options::{Cli, Command};

/// Environment variable capping worker threads.
const THREADS_VAR: &str = "TRANSFER_BENCH_THREADS";

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::input(format!("{THREADS_VAR} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Score(f) => score::run(&f.resolve()?).map(drop),
        Command::Bench(f) => bench::run(&f.resolve()?).map(drop),
        Command::Btb(f) => btb::run(&f.resolve()?).map(drop),
        Command::Report(f) => report::run(&f.resolve()?).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("transfer-bench: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
