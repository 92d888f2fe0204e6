//! `dnim`: experiment harness over `dnim-core`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 non-finite numbers.

mod args;
mod commands;
mod io;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use io::{CliError, CliResult, EXIT_USAGE};

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(e.to_string()))?;
    }
    let seed = cli.rng_seed.unwrap_or(0);
    match &cli.command {
        Command::Ingest(a) => commands::ingest(a, cli.rng_seed),
        Command::Evaluate(a) => commands::evaluate(a, seed),
        Command::Select(a) => commands::select(a, seed),
        Command::Train(a) => commands::train(a, cli.rng_seed),
        Command::Simulate(a) => commands::simulate(a, seed),
        Command::Embed(a) => commands::embed(a, cli.rng_seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
