//! `pgg` command-line front end.
//!
//! Every command reads a flat JSON config (see [`ExperimentConfig`]) and writes
//! CSV or JSON to `--out` or stdout. Errors are printed to stderr as
//! `{"error": <name>, "message": <text>}`. Exit code 1 means invalid input,
//! 2 a numerical or consistency failure.
//!
//! Randomness comes from ChaCha8 keyed by the 64-bit seed, with one stream per
//! run, so output depends only on the config and seed.

pub mod commands;
pub mod config;
pub mod suite;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use config::ExperimentConfig;

use crate::equilibrium::Schedule;
use crate::error::{Error, Result};
use commands::Output;

#[derive(Debug, Parser)]
#[command(
    name = "pgg",
    version,
    about = "Threshold equilibria of Poisson global games"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Experiment config (flat JSON)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Seed for stochastic commands; overrides `seed` in the config
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output file; stdout when absent
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub schedule: Option<Schedule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Run best-response dynamics and report the profile reached (JSON)
    Solve,
    /// Equilibrium thresholds of the reference binary game (CSV)
    Table1,
    /// Tally equilibria reached from random geometric inits (CSV)
    Multiplicity,
    /// Sweep the existence conditions over a rate grid (CSV)
    Conditions,
    /// Run the numerical invariant suite (JSON)
    Verify,
    /// Exact and Monte-Carlo payoffs plus the deviation check (JSON)
    Payoff,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    match &cli.config {
        Some(path) => ExperimentConfig::load(path),
        None => Ok(ExperimentConfig::default()),
    }
}

/// Runs one parsed invocation and returns its output.
pub fn execute(cli: &Cli) -> Result<Output> {
    if cli.command == Command::Table1 {
        return commands::table1();
    }
    let config = load_config(cli)?;
    match cli.command {
        Command::Solve => commands::solve(&config, cli.schedule),
        Command::Table1 => unreachable!(),
        Command::Multiplicity => commands::multiplicity(&config, cli.seed),
        Command::Conditions => commands::conditions(&config),
        Command::Verify => commands::verify(&config, cli.seed),
        Command::Payoff => commands::payoff(&config, cli.seed, cli.schedule),
    }
}

fn emit(cli: &Cli, output: &Output) -> std::io::Result<()> {
    match &cli.out {
        Some(path) => std::fs::write(path, &output.body),
        None => std::io::stdout().lock().write_all(output.body.as_bytes()),
    }
}

fn report(err: &Error) -> ExitCode {
    let doc = serde_json::json!({ "error": err.name(), "message": err.to_string() });
    eprintln!("{doc}");
    ExitCode::from(if err.is_validation() { 1 } else { 2 })
}

pub fn run(cli: Cli) -> ExitCode {
    let output = match execute(&cli) {
        Ok(output) => output,
        Err(err) => return report(&err),
    };
    if let Err(e) = emit(&cli, &output) {
        return report(&Error::InvalidArgument(format!("writing output: {e}")));
    }
    if output.failed {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}
