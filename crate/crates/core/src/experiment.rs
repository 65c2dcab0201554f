//! Monte-Carlo experiment runners: convergence traces and phase-transition
//! grids.
//!
//! Every trial draws its truth, data, initial point, and SGD stream from
//! child seeds keyed by `(master seed, n, d, k, trial)`, so adding trials or
//! reordering cells never changes results already computed. Trials run on a
//! bounded worker pool and are merged back in `(cell, trial)` order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{gen_dataset, gen_truth_orthonormal, gen_truth_sphere, slope_separation, CovariateLaw};
use crate::error::{Error, Result};
use crate::init::{moment_init, perturb_init, NeighborhoodSpec};
use crate::metrics::{relative_error, DEFAULT_SUCCESS_LOG10};
use crate::model::{Dataset, ModelParams};
use crate::rng::derive_seed;
use crate::solvers::{self, Algorithm, SolverConfig, SolverRun};

/// Environment variable overriding the number of worker threads.
pub const WORKERS_ENV: &str = "MAXAFFINE_WORKERS";

pub const DEFAULT_TRIALS: usize = 50;

pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Runs `f(i)` for `i in 0..count` on the worker pool; output is in index order.
pub fn parallel_map<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::input(format!("could not start worker pool: {e}")))?;
    Ok(pool.install(|| (0..count).into_par_iter().map(&f).collect()))
}

pub mod stats {
    //! Order statistics with linear interpolation between closest ranks.

    /// `p`-th percentile (`0 <= p <= 100`) of `values`; NaN for an empty slice.
    pub fn percentile(values: &[f64], p: f64) -> f64 {
        if values.is_empty() {
            return f64::NAN;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let pos = p / 100.0 * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        if lo == hi || v[lo] == v[hi] {
            return v[lo];
        }
        let frac = pos - lo as f64;
        v[lo] + frac * (v[hi] - v[lo])
    }

    pub fn median(values: &[f64]) -> f64 {
        percentile(values, 50.0)
    }

    pub fn mean(values: &[f64]) -> f64 {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TruthKind {
    #[default]
    Orthonormal,
    Sphere,
}

impl TruthKind {
    pub fn generate(&self, k: usize, d: usize, seed: u64) -> Result<ModelParams> {
        match self {
            TruthKind::Orthonormal => gen_truth_orthonormal(k, d, seed),
            TruthKind::Sphere => gen_truth_sphere(k, d, seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitMethod {
    /// Uniform draw in the per-block ball of radius `rho * kappa` around the truth.
    Perturb { rho: f64 },
    Moment,
}

impl Default for InitMethod {
    fn default() -> Self {
        InitMethod::Perturb { rho: 0.1 }
    }
}

impl InitMethod {
    pub fn initialize(&self, truth: Option<&ModelParams>, data: &Dataset, k: usize, seed: u64) -> Result<ModelParams> {
        match *self {
            InitMethod::Perturb { rho } => {
                let truth = truth.ok_or_else(|| Error::input("perturbation init requires a ground truth"))?;
                let kappa = slope_separation(truth);
                let kappa = if kappa.is_finite() { kappa } else { crate::linalg::norm(truth.slope(0)) };
                perturb_init(truth, &NeighborhoodSpec::new(rho, kappa)?, seed)
            }
            InitMethod::Moment => moment_init(data, k),
        }
    }
}

/// Per-algorithm solver settings; unset fields take the algorithm defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub max_iters: Option<usize>,
    pub step_size: Option<f64>,
    pub record_every: Option<usize>,
    pub tol: Option<f64>,
}

/// Settings shared by every trial of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialSettings {
    #[serde(default = "default_law")]
    pub law: CovariateLaw,
    #[serde(default)]
    pub truth: TruthKind,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub init: InitMethod,
    #[serde(default)]
    pub gd: SolverOverrides,
    #[serde(default)]
    pub sgd: SolverOverrides,
    #[serde(default)]
    pub am: SolverOverrides,
    /// Stop a run once its log10 relative error reaches this level.
    #[serde(default)]
    pub stop_log10: Option<f64>,
}

fn default_law() -> CovariateLaw {
    CovariateLaw::StandardGaussian
}

fn default_batch() -> usize {
    64
}

impl Default for TrialSettings {
    fn default() -> Self {
        TrialSettings {
            law: default_law(),
            truth: TruthKind::default(),
            sigma: 0.0,
            batch_size: default_batch(),
            init: InitMethod::default(),
            gd: SolverOverrides::default(),
            sgd: SolverOverrides::default(),
            am: SolverOverrides::default(),
            stop_log10: None,
        }
    }
}

impl TrialSettings {
    pub fn solver_config(&self, algorithm: Algorithm, n: usize, seed: u64) -> SolverConfig {
        let mut cfg = SolverConfig::for_algorithm(algorithm, self.batch_size);
        let ov = match algorithm {
            Algorithm::Gd => &self.gd,
            Algorithm::Sgd => &self.sgd,
            Algorithm::Am => &self.am,
        };
        if algorithm == Algorithm::Sgd {
            // a full-data loss evaluation costs about n/m steps; record about once per epoch
            cfg.record_every = n.div_ceil(self.batch_size.max(1)).max(1);
        }
        cfg.max_iters = ov.max_iters.unwrap_or(cfg.max_iters);
        cfg.step_size = ov.step_size;
        cfg.record_every = ov.record_every.unwrap_or(cfg.record_every);
        cfg.tol = ov.tol.unwrap_or(cfg.tol);
        cfg.stop_log10 = self.stop_log10;
        cfg.seed = derive_seed(seed, &[0x736f_6c76]);
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::input(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        if self.batch_size == 0 {
            return Err(Error::input("batch_size must be >= 1"));
        }
        if let InitMethod::Perturb { rho } = self.init {
            NeighborhoodSpec::new(rho, 1.0)?;
        }
        Ok(())
    }
}

/// One synthetic problem instance.
#[derive(Debug, Clone)]
pub struct TrialSetup {
    pub seed: u64,
    pub truth: ModelParams,
    pub data: Dataset,
    pub init: ModelParams,
}

/// Seed of trial `trial` in the cell `(n, d, k)`.
pub fn trial_seed(master: u64, n: usize, d: usize, k: usize, trial: usize) -> u64 {
    derive_seed(master, &[n as u64, d as u64, k as u64, trial as u64])
}

pub fn setup_trial(settings: &TrialSettings, master: u64, n: usize, d: usize, k: usize, trial: usize) -> Result<TrialSetup> {
    let seed = trial_seed(master, n, d, k, trial);
    let truth = settings.truth.generate(k, d, derive_seed(seed, &[1]))?;
    let data = gen_dataset(&truth, settings.law, n, settings.sigma, derive_seed(seed, &[2]))?;
    let init = settings.init.initialize(Some(&truth), &data, k, derive_seed(seed, &[3]))?;
    Ok(TrialSetup { seed, truth, data, init })
}

/// Runs one algorithm on a trial. A diverged run is scored at its last finite iterate.
pub fn run_on_trial(settings: &TrialSettings, setup: &TrialSetup, algorithm: Algorithm) -> Result<TrialOutcome> {
    let cfg = settings.solver_config(algorithm, setup.data.n(), setup.seed);
    match solvers::run(&setup.data, &setup.init, &cfg, Some(&setup.truth)) {
        Ok(run) => Ok(TrialOutcome::from_run(run)),
        Err(Error::Diverged { last_finite, .. }) => {
            let log10 = relative_error(&last_finite, &setup.truth)?.log10_rel_error;
            Ok(TrialOutcome { final_log10: log10, diverged: true, run: None, time_ms: f64::NAN, iterations: 0 })
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub final_log10: f64,
    pub diverged: bool,
    pub run: Option<SolverRun>,
    pub time_ms: f64,
    pub iterations: usize,
}

impl TrialOutcome {
    fn from_run(run: SolverRun) -> Self {
        let last = run.final_record();
        TrialOutcome {
            final_log10: last.log10_rel_error.unwrap_or(f64::NAN),
            diverged: false,
            time_ms: last.time_ms,
            iterations: run.iterations_used,
            run: Some(run),
        }
    }
}

// ---------------------------------------------------------------------------
// convergence traces

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    pub k: usize,
    pub d: usize,
    pub n: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "all_algorithms")]
    pub algorithms: Vec<Algorithm>,
    /// Level used for the per-trial time-to-target summary.
    #[serde(default = "default_target")]
    pub target_log10: f64,
    #[serde(flatten)]
    pub settings: TrialSettings,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn all_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

fn default_target() -> f64 {
    DEFAULT_SUCCESS_LOG10
}

impl TraceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.d == 0 || self.n == 0 {
            return Err(Error::input("k, d, n must all be >= 1"));
        }
        if self.trials == 0 {
            return Err(Error::input("trials must be >= 1"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::input("at least one algorithm is required"));
        }
        if self.settings.truth == TruthKind::Orthonormal && self.k > self.d {
            return Err(Error::input(format!("orthonormal truth needs k <= d, got k={}, d={}", self.k, self.d)));
        }
        self.settings.validate()
    }
}

/// One row of an aggregated trace: statistics across trials at a fixed iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub mean_time_ms: f64,
    pub median_log10: f64,
    pub p90_log10: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub final_log10: f64,
    pub iterations: usize,
    pub diverged: bool,
    /// Solver time when the error first reached the target level, if ever.
    pub time_to_target_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmTrace {
    pub algorithm: Algorithm,
    pub points: Vec<TracePoint>,
    pub trials: Vec<TrialSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceResult {
    pub algorithms: Vec<AlgorithmTrace>,
}

/// Aligns per-trial traces on iteration index. A trial that stopped early
/// contributes its final record to every later iteration.
pub fn aggregate_traces(runs: &[&SolverRun]) -> Vec<TracePoint> {
    let mut iters: Vec<usize> = runs.iter().flat_map(|r| r.trace.iter().map(|t| t.iteration)).collect();
    iters.sort_unstable();
    iters.dedup();
    let mut cursors = vec![0usize; runs.len()];
    iters
        .into_iter()
        .map(|it| {
            let mut errs = Vec::with_capacity(runs.len());
            let mut times = Vec::with_capacity(runs.len());
            for (run, cur) in runs.iter().zip(cursors.iter_mut()) {
                while *cur + 1 < run.trace.len() && run.trace[*cur + 1].iteration <= it {
                    *cur += 1;
                }
                let rec = &run.trace[*cur];
                errs.push(rec.log10_rel_error.unwrap_or(f64::NAN));
                times.push(rec.time_ms);
            }
            TracePoint {
                iteration: it,
                mean_time_ms: stats::mean(&times),
                median_log10: stats::median(&errs),
                p90_log10: stats::percentile(&errs, 90.0),
            }
        })
        .collect()
}

pub fn run_trace_experiment(config: &TraceConfig) -> Result<TraceResult> {
    config.validate()?;
    let (k, d, n) = (config.k, config.d, config.n);
    let settings = &config.settings;
    let outcomes = parallel_map(config.trials, |t| -> Result<Vec<TrialOutcome>> {
        let setup = setup_trial(settings, config.seed, n, d, k, t)?;
        config.algorithms.iter().map(|&a| run_on_trial(settings, &setup, a)).collect()
    })?;
    let outcomes: Vec<Vec<TrialOutcome>> = outcomes.into_iter().collect::<Result<_>>()?;

    let mut algorithms = Vec::new();
    for (ai, &alg) in config.algorithms.iter().enumerate() {
        let per_trial: Vec<&TrialOutcome> = outcomes.iter().map(|o| &o[ai]).collect();
        let runs: Vec<&SolverRun> = per_trial.iter().filter_map(|o| o.run.as_ref()).collect();
        let trials = per_trial
            .iter()
            .enumerate()
            .map(|(t, o)| TrialSummary {
                trial: t,
                final_log10: o.final_log10,
                iterations: o.iterations,
                diverged: o.diverged,
                time_to_target_ms: o.run.as_ref().and_then(|r| r.time_to_reach(config.target_log10)),
            })
            .collect();
        algorithms.push(AlgorithmTrace { algorithm: alg, points: aggregate_traces(&runs), trials });
    }
    Ok(TraceResult { algorithms })
}

// ---------------------------------------------------------------------------
// phase-transition grids

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    /// Absolute sample sizes.
    #[serde(default)]
    pub n: Vec<usize>,
    /// Sample sizes as multiples of `k(d+1)`, resolved per row.
    #[serde(default)]
    pub n_scale: Vec<f64>,
    pub d: Vec<usize>,
    pub k: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "all_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_target")]
    pub success_log10: f64,
    /// Success rate at which a row's threshold `n*` is read off.
    #[serde(default = "default_threshold_rate")]
    pub threshold_rate: f64,
    #[serde(flatten)]
    pub settings: TrialSettings,
}

fn default_threshold_rate() -> f64 {
    0.5
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() == self.n_scale.is_empty() {
            return Err(Error::input("give exactly one of `n` or `n_scale`"));
        }
        if self.d.is_empty() || self.k.is_empty() {
            return Err(Error::input("grid axes `d` and `k` must be nonempty"));
        }
        if self.trials == 0 {
            return Err(Error::input("trials must be >= 1"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::input("at least one algorithm is required"));
        }
        if self.n.contains(&0) || self.n_scale.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::input("sample sizes must be positive"));
        }
        for &d in &self.d {
            for &k in &self.k {
                if k == 0 || d == 0 || (self.settings.truth == TruthKind::Orthonormal && k > d) {
                    return Err(Error::input(format!("invalid grid row k={k}, d={d}")));
                }
            }
        }
        self.settings.validate()
    }

    /// Rows `(d, k)` in axis order, each with its sample sizes.
    pub fn rows(&self) -> Vec<(usize, usize, Vec<usize>)> {
        let mut out = Vec::new();
        for &d in &self.d {
            for &k in &self.k {
                let ns = if self.n.is_empty() {
                    self.n_scale.iter().map(|s| ((s * (k * (d + 1)) as f64).round() as usize).max(1)).collect()
                } else {
                    self.n.clone()
                };
                out.push((d, k, ns));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCell {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub algorithm: Algorithm,
    pub trials: usize,
    pub median_log10: f64,
    pub p90_log10: f64,
    pub success_rate: f64,
    pub successes: usize,
    pub mean_time_ms: f64,
    /// Trials that diverged or could not be set up.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowThreshold {
    pub d: usize,
    pub k: usize,
    pub algorithm: Algorithm,
    /// Smallest `n` whose success rate reaches the threshold rate.
    pub n_star: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub cells: Vec<GridCell>,
    pub thresholds: Vec<RowThreshold>,
}

impl GridResult {
    pub fn threshold(&self, d: usize, k: usize, algorithm: Algorithm) -> Option<usize> {
        self.thresholds
            .iter()
            .find(|t| t.d == d && t.k == k && t.algorithm == algorithm)
            .and_then(|t| t.n_star)
    }

    /// Cells of one `(d, k, algorithm)` row in increasing `n`.
    pub fn row(&self, d: usize, k: usize, algorithm: Algorithm) -> Vec<&GridCell> {
        let mut v: Vec<&GridCell> =
            self.cells.iter().filter(|c| c.d == d && c.k == k && c.algorithm == algorithm).collect();
        v.sort_by_key(|c| c.n);
        v
    }
}

struct TrialScore {
    log10: f64,
    time_ms: f64,
    failed: bool,
}

pub fn run_phase_grid(grid: &ExperimentGrid) -> Result<GridResult> {
    grid.validate()?;
    let settings = &grid.settings;
    let mut tasks = Vec::new();
    for (d, k, ns) in grid.rows() {
        for n in ns {
            for t in 0..grid.trials {
                tasks.push((n, d, k, t));
            }
        }
    }
    let scores: Vec<Vec<TrialScore>> = parallel_map(tasks.len(), |i| {
        let (n, d, k, t) = tasks[i];
        let setup = setup_trial(settings, grid.seed, n, d, k, t);
        grid.algorithms
            .iter()
            .map(|&alg| {
                let outcome = setup.as_ref().map_err(|_| ()).and_then(|s| run_on_trial(settings, s, alg).map_err(|_| ()));
                match outcome {
                    Ok(o) => TrialScore { log10: o.final_log10, time_ms: o.time_ms, failed: o.diverged },
                    Err(()) => TrialScore { log10: f64::INFINITY, time_ms: f64::NAN, failed: true },
                }
            })
            .collect()
    })?;

    let mut cells = Vec::new();
    for (start, chunk) in (0..tasks.len()).step_by(grid.trials).map(|s| (s, &scores[s..s + grid.trials])) {
        let (n, d, k, _) = tasks[start];
        for (ai, &alg) in grid.algorithms.iter().enumerate() {
            let errs: Vec<f64> = chunk.iter().map(|s| s[ai].log10).collect();
            let times: Vec<f64> = chunk.iter().map(|s| s[ai].time_ms).filter(|t| t.is_finite()).collect();
            let successes = errs.iter().filter(|&&e| e <= grid.success_log10).count();
            cells.push(GridCell {
                n,
                d,
                k,
                algorithm: alg,
                trials: grid.trials,
                median_log10: stats::median(&errs),
                p90_log10: stats::percentile(&errs, 90.0),
                success_rate: successes as f64 / grid.trials as f64,
                successes,
                mean_time_ms: if times.is_empty() { f64::NAN } else { stats::mean(&times) },
                failures: chunk.iter().filter(|s| s[ai].failed).count(),
            });
        }
    }

    let mut result = GridResult { cells, thresholds: Vec::new() };
    for (d, k, _) in grid.rows() {
        for &alg in &grid.algorithms {
            let n_star = result
                .row(d, k, alg)
                .iter()
                .find(|c| c.success_rate >= grid.threshold_rate)
                .map(|c| c.n);
            result.thresholds.push(RowThreshold { d, k, algorithm: alg, n_star });
        }
    }
    Ok(result)
}
