//! `metahit`: exact hitting-time analysis of finite Markov chains.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numerical or check failure.

mod commands;
mod config;
mod error;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::FileConfig;
use crate::error::CliError;

/// Environment variable holding the worker thread count.
const WORKERS_ENV: &str = "METAHIT_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "metahit", version, about = "Hitting times, recurrence and metastability of finite Markov chains")]
struct Cli {
    /// JSON config file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a preset chain as JSON
    Model(commands::ModelArgs),
    /// Full report for one chain and reference pair
    Analyze(commands::AnalyzeArgs),
    /// Evaluate a model family over a parameter grid and fit exponents
    Sweep(commands::SweepArgs),
    /// Run inequality suites; exit 0 iff every check passes
    Verify(commands::VerifyArgs),
    /// Sample hitting times and compare with the exact law
    Simulate(commands::SimulateArgs),
}

fn configure_workers() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{WORKERS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot start {n} workers: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_workers()?;
    let cfg = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match &cli.command {
        Command::Model(a) => commands::model(a, &cfg),
        Command::Analyze(a) => commands::analyze(a, &cfg),
        Command::Sweep(a) => commands::sweep(a, &cfg),
        Command::Verify(a) => commands::verify(a, &cfg),
        Command::Simulate(a) => commands::simulate(a, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
