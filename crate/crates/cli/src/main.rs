//! `dcprox`: train sparse (transductive) logistic models with the DC proximal
//! Newton solver or its baselines, generate toy data and run benchmarks.
//!
//! Exit codes: 0 success, 2 usage or I/O error, 3 solver failure.

mod commands;
mod error;
mod pipeline;
mod report;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;
use crate::settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "dcprox", version, about = "DC proximal Newton solvers for sparse logistic models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic two-class toy data as libsvm files
    Toygen(CommandArgs),
    /// Train one model and write model.txt, trace.jsonl and result.json
    Train(CommandArgs),
    /// Train the transductive model and its supervised counterpart
    Transductive(CommandArgs),
    /// Compare solvers over several seeds; writes records.jsonl, summary.{csv,json}, timing.csv
    Benchmark(CommandArgs),
}

#[derive(Debug, Args)]
struct CommandArgs {
    /// TOML file whose keys override the flags
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

impl CommandArgs {
    fn resolve(self) -> Result<Settings, CliError> {
        match self.config {
            Some(path) => Ok(self.settings.overridden_by(Settings::from_toml_file(&path)?)),
            None => Ok(self.settings),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Toygen(a) => commands::toygen(&a.resolve()?),
        Command::Train(a) => commands::train(&a.resolve()?),
        Command::Transductive(a) => commands::transductive(&a.resolve()?),
        Command::Benchmark(a) => commands::benchmark(&a.resolve()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
