//! TOML configuration schemas for the `fit` and `diagnose` subcommands.
//! `trace` and `phase-grid` read the experiment types from the core crate.

use std::path::Path;

use maxaffine::experiment::{InitMethod, TruthKind};
use maxaffine::solvers::{Algorithm, SolverConfig};
use maxaffine::{CovariateLaw, Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Input(format!("config {}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub algorithm: Algorithm,
    pub k: usize,
    /// Expected covariate dimension; checked against the dataset when given.
    pub d: Option<usize>,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub step_size: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub record_every: Option<usize>,
    pub stop_log10: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_fit_init")]
    pub init: InitMethod,
}

fn default_batch() -> usize {
    64
}

fn default_fit_init() -> InitMethod {
    InitMethod::Moment
}

impl FitConfig {
    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::for_algorithm(self.algorithm, self.batch_size);
        cfg.step_size = self.step_size;
        cfg.max_iters = self.max_iters.unwrap_or(cfg.max_iters);
        cfg.tol = self.tol.unwrap_or(cfg.tol);
        cfg.record_every = self.record_every.unwrap_or(cfg.record_every);
        cfg.stop_log10 = self.stop_log10;
        cfg.seed = self.seed;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub k: usize,
    pub d: usize,
    pub n: usize,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_law")]
    pub law: CovariateLaw,
    #[serde(default)]
    pub truth: TruthKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    /// Small-ball exponent; defaults to the nominal value of the law.
    pub zeta: Option<f64>,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "one")]
    pub r_const: f64,
    /// Leading constant of the sample-size condition. The absolute constants
    /// have no known values, so these three are required.
    pub c: f64,
    /// Leading constant of the error bounds.
    pub c_prime: f64,
    /// Per-iteration contraction factor of the GD bound curve.
    pub nu: f64,
    /// Initial distance of the GD bound curve; defaults to `sqrt(k) rho kappa`.
    pub init_dist: Option<f64>,
    #[serde(default = "default_bound_iters")]
    pub bound_iters: u32,
    #[serde(default = "default_batches")]
    pub batch_sizes: Vec<usize>,
    /// Subset fraction for the worst-subset eigenvalue (computed when `n` is tiny).
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_delta() -> f64 {
    0.01
}
fn default_law() -> CovariateLaw {
    CovariateLaw::StandardGaussian
}
fn default_mc() -> usize {
    200_000
}
fn one() -> f64 {
    1.0
}
fn default_bound_iters() -> u32 {
    100
}
fn default_batches() -> Vec<usize> {
    vec![16, 32, 64, 128, 256]
}
fn default_alpha() -> f64 {
    0.5
}
