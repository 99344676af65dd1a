//! Command-line front end: JSON configuration, CSV tables and SVG figures.

pub mod commands;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod plot;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::config::{parse_config, Command, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "rkhs-inverse", version, about = "Kernel methods for statistical inverse regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArg,
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Base seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "RKHS_INVERSE_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum CommandArg {
    /// Assemble the pseudo kernel matrix for a design.
    Gram,
    /// Fit coefficients from M and y.
    Fit,
    /// Evaluate a fitted RKM on a grid.
    Predict,
    /// Spectral cut-off estimate.
    Sce,
    /// Run the simulation study.
    Simulate,
    /// Check the quadratic lower bound on the excess risk.
    Selfcal,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Gram => Command::Gram,
            CommandArg::Fit => Command::Fit,
            CommandArg::Predict => Command::Predict,
            CommandArg::Sce => Command::Sce,
            CommandArg::Simulate => Command::Simulate,
            CommandArg::Selfcal => Command::Selfcal,
        }
    }
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    let wanted = Command::from(cli.command);
    if let Some(c) = cfg.command {
        if c != wanted {
            return Err(CliError::Config(format!("command: config is for {c:?}, invoked as {wanted:?}")));
        }
    }
    cfg.command = Some(wanted);
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Runs one invocation and returns the line to print on success.
pub fn run(cli: &Cli) -> CliResult<String> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("threads: must be at least 1".into()));
        }
        // A second initialization in the same process is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let ctx = Context::new(load_config(cli)?)?;
    match cli.command {
        CommandArg::Gram => commands::gram(&ctx),
        CommandArg::Fit => commands::fit(&ctx),
        CommandArg::Predict => commands::predict(&ctx),
        CommandArg::Sce => commands::sce(&ctx),
        CommandArg::Simulate => commands::simulate(&ctx),
        CommandArg::Selfcal => commands::selfcal(&ctx),
    }
}
