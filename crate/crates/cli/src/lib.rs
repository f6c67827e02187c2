//! The `optrunc` command-line driver.

#![allow(clippy::needless_range_loop)]

use std::path::PathBuf;

use anyhow::{ensure, Result};
use clap::{Parser, Subcommand};

pub mod config;
pub mod csvout;
pub mod decay;
pub mod setup;
pub mod tables;
pub mod verify;

use config::{Config, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "optrunc", version, about = "Renewal operators, truncated towers and decay of correlations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Independent Monte Carlo trajectories (overrides `mc.batches`).
    #[arg(long, global = true)]
    pub shards: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, Subcommand)]
pub enum Command {
    /// Run the identity checks and write verify_report.csv.
    Verify,
    /// Correlations with the bound overlay: correlation.csv and summary.csv.
    Decay,
    /// Bound decomposition and recipe tables: bounds.csv and params.csv.
    Bounds,
    /// Renewal sequence and residuals: renewal.csv.
    Renewal,
    /// Re-fit the rho column of an existing correlation.csv into fit.csv.
    Fit,
}

/// Outcome of a successful run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// Number of failed checks.
    Failed(usize),
}

pub fn run(cli: &Cli) -> Result<Status> {
    let path = cli.config.as_ref().ok_or_else(|| anyhow::anyhow!("--config is required"))?;
    let run = RunConfig { config: Config::load(path)?, seed: cli.seed, shards: cli.shards, out: cli.out.clone() };
    if let Some(s) = run.shards {
        ensure!(s >= 1, "--shards must be at least 1");
    }
    std::fs::create_dir_all(&run.out)?;
    match cli.command {
        Command::Verify => {
            let failed = verify::cmd_verify(&run)?;
            return Ok(if failed == 0 { Status::Ok } else { Status::Failed(failed) });
        }
        Command::Decay => decay::cmd_decay(&run)?,
        Command::Bounds => tables::cmd_bounds(&run)?,
        Command::Renewal => tables::cmd_renewal(&run)?,
        Command::Fit => decay::cmd_fit(&run)?,
    }
    Ok(Status::Ok)
}
