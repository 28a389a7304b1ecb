mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::Parser;

use crate::commands::Command;
use crate::config::{CommonArgs, RunConfig};
use crate::error::{exit, CliError, EXIT_CODES_HELP};

/// Simplex certification, fixed points, heteroclinic cycles and orbits of
/// three-species competitive Kolmogorov maps.
#[derive(Debug, Parser)]
#[command(name = "hetcycle", version, after_help = EXIT_CODES_HELP)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    let cfg = RunConfig::resolve(&cli.common)?;
    match cfg.workers {
        None => commands::run(&cli.command, &cfg),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} workers: {e}")))?
            .install(|| commands::run(&cli.command, &cfg)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("hetcycle: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
