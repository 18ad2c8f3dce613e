//! Command-line front end: configuration, dispatch and file output for the
//! `liquidation-core` numerics.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "liquidation", version, about = "Optimal signal-adaptive liquidation with transient impact")]
pub struct Cli {
    /// TOML run configuration; every section is optional.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides output.directory).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Random seed (overrides mc.seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of Monte Carlo paths (overrides mc.n_paths).
    #[arg(long, global = true, value_name = "N")]
    pub paths: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form optimal path for a deterministic or zero signal.
    Solve,
    /// Monte Carlo comparison of the adaptive, no-signal and temporary-only laws.
    Simulate,
    /// Run the invariant suite; exit 1 if any check fails.
    Verify,
    /// Random search for parameters violating the well-posedness condition.
    Sweep(SweepArgs),
    /// Write a gnuplot script for the CSV files in the output directory.
    PlotScript,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Lower corner of the (lambda, gamma, kappa, rho, varrho, phi, T) box:
    /// one value or seven comma-separated values.
    #[arg(long, default_value = "0")]
    pub lo: String,
    /// Upper corner, same format.
    #[arg(long, default_value = "100")]
    pub hi: String,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Points of the time-to-go grid per sample.
    #[arg(long, default_value_t = 1001)]
    pub grid: usize,
}

fn parse_corner(text: &str) -> Result<[f64; 7], CliError> {
    let vals = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Config(format!("box corner `{text}`: {e}")))?;
    match vals.len() {
        1 => Ok([vals[0]; 7]),
        7 => Ok(std::array::from_fn(|k| vals[k])),
        n => Err(CliError::Config(format!("box corner needs 1 or 7 values, got {n}"))),
    }
}

fn execute(cli: &Cli) -> Result<u8, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.mc.seed = seed;
    }
    if let Some(n) = cli.paths {
        cfg.mc.n_paths = n;
    }
    if let Some(dir) = &cli.out {
        cfg.output.directory = dir.clone();
    }
    cfg.validate()?;
    let out = cfg.output.directory.clone();
    match &cli.command {
        Command::Solve => commands::solve(&cfg, &out),
        Command::Simulate => commands::simulate(&cfg, &out),
        Command::Verify => commands::verify(&cfg, &out),
        Command::Sweep(a) => commands::sweep(&cfg, &out, parse_corner(&a.lo)?, parse_corner(&a.hi)?, a.samples, a.grid),
        Command::PlotScript => commands::plot(&out),
    }
}

/// Parses `args` and runs the command. Exit codes: 0 success, 1 a check or
/// computation failed, 2 the well-posedness condition is violated, 3 usage
/// or configuration error.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
