use std::path::{Path, PathBuf};

use replica_portfolio::{ExperimentConfig, NoiseSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Contents of the `--config` file: an experiment plus output options.
///
/// ```json
/// {
///   "n_assets": 1000, "period_ratio": 2.0, "n_trials": 100, "seed": 1,
///   "hyper": {"model": {
///     "mean_dist":  {"kind": "bounded_pareto", "lower": 1.0, "upper": 2.0, "power": 2.0},
///     "ratio_dist": {"kind": "bounded_pareto", "lower": 1.0, "upper": 2.0, "power": 2.0},
///     "coupling": "product"}},
///   "noise": "gaussian",
///   "r_grid": [1.0, 1.05, 1.1],
///   "out": "results", "plot": true
/// }
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub plot: bool,
    /// Risk levels for the dual-bound table written by `predict`.
    #[serde(default)]
    pub dual_epsilons: Vec<f64>,
    /// Write the return matrix of trial 0 as a binary dump.
    #[serde(default)]
    pub dump_x: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: ExperimentConfig::pareto_reference(1000, 2.0, 100),
            out: None,
            plot: false,
            dual_epsilons: Vec::new(),
            dump_x: false,
        }
    }
}

/// Flag overrides; each field shadows the config entry of the same name.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// JSON config file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Emit SVG plots
    #[arg(long, global = true)]
    pub plot: bool,
    #[arg(long, global = true)]
    pub n_assets: Option<usize>,
    #[arg(long, global = true)]
    pub period_ratio: Option<f64>,
    #[arg(long, global = true)]
    pub n_periods: Option<usize>,
    #[arg(long, global = true)]
    pub n_trials: Option<usize>,
    /// gaussian | uniform | rademacher
    #[arg(long, global = true)]
    pub noise: Option<NoiseSpec>,
    /// Comma-separated return coefficients
    #[arg(long, global = true, value_delimiter = ',')]
    pub r_grid: Option<Vec<f64>>,
    /// Comma-separated risk levels for the dual-bound table
    #[arg(long, global = true, value_delimiter = ',')]
    pub dual_epsilons: Option<Vec<f64>>,
    /// Dump the return matrix of trial 0
    #[arg(long, global = true)]
    pub dump_x: bool,
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl Overrides {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => load(path)?,
            None => RunConfig::default(),
        };
        let e = &mut cfg.experiment;
        if let Some(v) = self.seed {
            e.seed = v;
        }
        if let Some(v) = self.workers {
            e.workers = v;
        }
        if let Some(v) = self.n_assets {
            e.n_assets = v;
        }
        if let Some(v) = self.period_ratio {
            e.period_ratio = Some(v);
            e.n_periods = None;
        }
        if let Some(v) = self.n_periods {
            e.n_periods = Some(v);
        }
        if let Some(v) = self.n_trials {
            e.n_trials = v;
        }
        if let Some(v) = self.noise {
            e.noise = v;
        }
        if let Some(v) = &self.r_grid {
            e.r_grid = v.clone();
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        if let Some(v) = &self.dual_epsilons {
            cfg.dual_epsilons = v.clone();
        }
        cfg.plot |= self.plot;
        cfg.dump_x |= self.dump_x;
        cfg.experiment.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}
