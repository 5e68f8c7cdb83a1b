//! Run configuration: command-line flags layered over an optional JSON file.

use std::fs;
use std::path::{Path, PathBuf};

use actscore::benchmarks::BenchmarkId;
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_QUAD_POINTS: usize = 7;
pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_SUMMARY_SAMPLES: usize = 500;
pub const DEFAULT_BOOTSTRAP: usize = 100;
pub const DEFAULT_CONVERGE_TRIALS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Quadrature,
    Montecarlo,
}

/// Analysis settings echoed into every report.
///
/// Execution details (thread count, output directory) are kept out so
/// reports compare equal across machines and thread counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: BenchmarkId,
    pub method: Method,
    pub quad_points: usize,
    pub mc_samples: usize,
    pub seed: u64,
    pub bootstrap_replicates: usize,
    pub subspace_dim: Option<usize>,
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_grid: Option<Vec<usize>>,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Benchmark model: piston or circuit.
    #[arg(long)]
    pub model: Option<String>,
    /// Monte Carlo sample budget M (summary: number of plot samples N).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Gauss-Legendre points per dimension.
    #[arg(long = "quad-points")]
    pub quad_points: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bootstrap replicates B.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Active subspace dimension n (default: largest eigenvalue gap).
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Worker threads; 0 uses every core, 1 is the reproducible reference mode.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with any of the run settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated sample sizes for `converge`.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
}

/// Settings readable from `--config`. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: Option<BenchmarkId>,
    pub quad_points: Option<usize>,
    pub mc_samples: Option<usize>,
    pub seed: Option<u64>,
    pub bootstrap_replicates: Option<usize>,
    pub subspace_dim: Option<usize>,
    pub trials: Option<usize>,
    pub sample_grid: Option<Vec<usize>>,
    pub threads: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// A resolved configuration plus execution settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub run: RunConfig,
    pub threads: usize,
    pub out: PathBuf,
}

/// Defaults that differ by subcommand.
#[derive(Debug, Clone, Copy)]
pub struct CommandDefaults {
    pub method: Method,
    pub samples: usize,
    pub trials: usize,
}

pub fn resolve(flags: &Flags, defaults: CommandDefaults) -> Result<Resolved, CliError> {
    let file = match &flags.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let model = match &flags.model {
        Some(name) => name.parse::<BenchmarkId>()?,
        None => file.model.ok_or_else(|| {
            CliError::Config("no model given (use --model piston|circuit)".into())
        })?,
    };
    let run = RunConfig {
        model,
        method: defaults.method,
        quad_points: flags
            .quad_points
            .or(file.quad_points)
            .unwrap_or(DEFAULT_QUAD_POINTS),
        mc_samples: flags
            .samples
            .or(file.mc_samples)
            .unwrap_or(defaults.samples),
        seed: flags.seed.or(file.seed).unwrap_or(0),
        bootstrap_replicates: flags
            .bootstrap
            .or(file.bootstrap_replicates)
            .unwrap_or(DEFAULT_BOOTSTRAP),
        subspace_dim: flags.dim.or(file.subspace_dim),
        trials: flags.trials.or(file.trials).unwrap_or(defaults.trials),
        sample_grid: flags.grid.clone().or(file.sample_grid),
    };
    Ok(Resolved {
        run,
        threads: flags.threads.or(file.threads).unwrap_or(0),
        out: flags
            .out
            .clone()
            .or(file.output_dir)
            .unwrap_or_else(|| PathBuf::from(".")),
    })
}
