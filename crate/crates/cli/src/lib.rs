//! Library side of the `actscore` command: argument parsing, configuration,
//! report assembly, and the four subcommands.

use std::io;
use std::path::Path;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod csv;
pub mod report;

pub use config::{Flags, RunConfig};
pub use report::SensitivityReport;

#[derive(Debug, Parser)]
#[command(
    name = "actscore",
    version,
    about = "Global sensitivity metrics for the piston and circuit benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quadrature reference values for all five metrics.
    Refvals(Flags),
    /// Monte Carlo estimates with bootstrap standard errors.
    Analyze(Flags),
    /// Relative errors and standard errors against M over repeated trials.
    Converge(Flags),
    /// Summary-plot samples, eigenvalues, activity scores and rankings.
    Summary(Flags),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] actscore::Error),
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Stable machine-readable category.
    pub fn tag(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.tag(),
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
        }
    }

    /// `error[tag]: message` on one line.
    pub fn line(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error[{}]: {msg}", self.tag())
    }
}

/// Run a parsed command, returning text for standard output.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Refvals(f) => commands::refvals(&f),
        Command::Analyze(f) => commands::analyze(&f),
        Command::Converge(f) => commands::converge(&f),
        Command::Summary(f) => commands::summary(&f),
    }
}
