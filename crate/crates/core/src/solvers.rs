//! Gradient descent, mini-batch SGD, and alternating minimization.
//!
//! All three share one driver that records a trace, checks the stopping
//! rule `|beta^{t+1} - beta^t| <= tol`, and aborts on divergence. Wall time
//! in the trace covers only the update steps; loss and error bookkeeping for
//! the trace is excluded.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sq_dist;
use crate::metrics::relative_error;
use crate::model::{assign_cells, check_dims, Dataset, ModelParams};
use crate::objective::{loss_and_gradient_into, loss_unchecked, minibatch_gradient_into};
use crate::rng::{child_rng, SolverRng};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_GD_STEP: f64 = 0.5;
/// Abort once the loss exceeds this multiple of the initial loss.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Gd,
    Sgd,
    Am,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Gd, Algorithm::Sgd, Algorithm::Am];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Gd => "gd",
            Algorithm::Sgd => "sgd",
            Algorithm::Am => "am",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gd" => Ok(Algorithm::Gd),
            "sgd" => Ok(Algorithm::Sgd),
            "am" => Ok(Algorithm::Am),
            other => Err(Error::input(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// SGD step `(1 ∧ m/d) / 2`, which scales with the batch size up to `m = d`.
pub fn default_sgd_step(batch_size: usize, d: usize) -> f64 {
    (batch_size as f64 / d as f64).min(1.0) / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Constant step size; `None` selects the per-algorithm default. Ignored by AM.
    pub step_size: Option<f64>,
    /// Mini-batch size `m` (SGD only). Any `m >= 1` is allowed since batches
    /// are drawn with replacement.
    pub batch_size: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    /// Record a trace entry every this many iterations (the initial and final
    /// iterates are always recorded).
    pub record_every: usize,
    /// With a ground truth supplied, stop once the recorded log10 relative
    /// error is at or below this value.
    pub stop_log10: Option<f64>,
}

impl SolverConfig {
    pub fn gd() -> Self {
        SolverConfig {
            algorithm: Algorithm::Gd,
            step_size: None,
            batch_size: 1,
            max_iters: 2000,
            tol: DEFAULT_TOL,
            seed: 0,
            record_every: 1,
            stop_log10: None,
        }
    }

    pub fn sgd(batch_size: usize) -> Self {
        SolverConfig { algorithm: Algorithm::Sgd, batch_size, max_iters: 20_000, ..Self::gd() }
    }

    pub fn am() -> Self {
        SolverConfig { algorithm: Algorithm::Am, max_iters: 100, ..Self::gd() }
    }

    pub fn for_algorithm(algorithm: Algorithm, batch_size: usize) -> Self {
        match algorithm {
            Algorithm::Gd => Self::gd(),
            Algorithm::Sgd => Self::sgd(batch_size),
            Algorithm::Am => Self::am(),
        }
    }

    pub fn effective_step_size(&self, d: usize) -> f64 {
        match (self.step_size, self.algorithm) {
            (Some(mu), _) => mu,
            (None, Algorithm::Sgd) => default_sgd_step(self.batch_size, d),
            (None, _) => DEFAULT_GD_STEP,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.algorithm != Algorithm::Am {
            let mu = self.effective_step_size(d);
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::input(format!("step size must be positive, got {mu}")));
            }
        }
        if self.algorithm == Algorithm::Sgd && self.batch_size == 0 {
            return Err(Error::input("batch size must be >= 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::input(format!("tolerance must be >= 0, got {}", self.tol)));
        }
        if self.record_every == 0 {
            return Err(Error::input("record_every must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub loss: f64,
    /// Cumulative solver time up to this iterate, in milliseconds.
    pub time_ms: f64,
    /// `|beta^t - beta*|_2` without block matching.
    pub dist_to_truth: Option<f64>,
    pub log10_rel_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverRun {
    pub final_params: ModelParams,
    pub trace: Vec<TraceRecord>,
    pub converged: bool,
    pub iterations_used: usize,
}

impl SolverRun {
    pub fn final_record(&self) -> &TraceRecord {
        self.trace.last().expect("trace always holds the initial iterate")
    }

    /// Solver time at which the recorded log10 relative error first reaches `level`.
    pub fn time_to_reach(&self, level: f64) -> Option<f64> {
        self.trace
            .iter()
            .find(|r| r.log10_rel_error.is_some_and(|e| e <= level))
            .map(|r| r.time_ms)
    }
}

/// Source of mini-batch index multisets.
pub trait BatchSampler {
    /// Fills `batch` with indices in `0..n`.
    fn fill(&mut self, n: usize, batch: &mut [usize]);
}

/// Independent uniform draws with replacement.
pub struct UniformSampler {
    rng: SolverRng,
}

impl UniformSampler {
    pub fn new(rng: SolverRng) -> Self {
        UniformSampler { rng }
    }
}

impl BatchSampler for UniformSampler {
    fn fill(&mut self, n: usize, batch: &mut [usize]) {
        for b in batch.iter_mut() {
            *b = self.rng.random_range(0..n);
        }
    }
}

struct StepOutcome {
    /// Loss at the iterate the step started from, when the step computed it anyway.
    loss_before: Option<f64>,
}

/// Per-algorithm update `current -> next`.
trait Update {
    /// Whether detecting `|next - current| <= tol` counts the step as an iteration.
    const COUNTS_FIXED_POINT_STEP: bool;
    fn step(&mut self, current: &ModelParams, next: &mut ModelParams) -> Result<StepOutcome>;
}

struct Recorder<'a> {
    data: &'a Dataset,
    truth: Option<&'a ModelParams>,
    trace: Vec<TraceRecord>,
    initial_loss: f64,
}

impl Recorder<'_> {
    fn record(&mut self, t: usize, params: &ModelParams, loss: Option<f64>, time_ms: f64) -> Result<()> {
        let loss = loss.unwrap_or_else(|| loss_unchecked(params, self.data));
        if self.trace.is_empty() {
            self.initial_loss = loss;
        }
        if !loss.is_finite() || (self.initial_loss > 0.0 && loss > DIVERGENCE_FACTOR * self.initial_loss) {
            return Err(Error::Diverged { iteration: t, loss, last_finite: Box::new(params.clone()) });
        }
        let (dist, rel) = match self.truth {
            Some(truth) => (
                Some(params.distance(truth)),
                Some(relative_error(params, truth)?.log10_rel_error),
            ),
            None => (None, None),
        };
        self.trace.push(TraceRecord { iteration: t, loss, time_ms, dist_to_truth: dist, log10_rel_error: rel });
        Ok(())
    }
}

fn drive<U: Update>(
    data: &Dataset,
    init: &ModelParams,
    config: &SolverConfig,
    truth: Option<&ModelParams>,
    mut update: U,
) -> Result<SolverRun> {
    check_dims(init, data)?;
    if data.n() == 0 {
        return Err(Error::input("dataset is empty"));
    }
    if let Some(t) = truth {
        if t.k() != init.k() || t.d() != init.d() {
            return Err(Error::input("ground truth shape differs from the initial estimate"));
        }
    }
    config.validate(data.d())?;

    let mut rec = Recorder { data, truth, trace: Vec::new(), initial_loss: 0.0 };
    let mut params = init.clone();
    let mut next = init.clone();
    let mut elapsed = 0.0f64;
    let mut converged = false;
    let mut iterations = 0usize;
    let mut last_recorded = None;

    for t in 0..config.max_iters {
        let started = Instant::now();
        let outcome = update.step(&params, &mut next)?;
        let step_ms = started.elapsed().as_secs_f64() * 1e3;

        if t % config.record_every == 0 {
            rec.record(t, &params, outcome.loss_before, elapsed)?;
            last_recorded = Some(t);
            if let (Some(level), Some(e)) = (config.stop_log10, rec.trace.last().and_then(|r| r.log10_rel_error)) {
                if e <= level {
                    break;
                }
            }
        }
        elapsed += step_ms;

        if !next.is_finite() {
            return Err(Error::Diverged { iteration: t + 1, loss: f64::NAN, last_finite: Box::new(params) });
        }
        let change = sq_dist(next.as_slice(), params.as_slice()).sqrt();
        if change <= config.tol {
            converged = true;
            if U::COUNTS_FIXED_POINT_STEP {
                std::mem::swap(&mut params, &mut next);
                iterations = t + 1;
            } else {
                iterations = t;
                // keep the timing record aligned with the iterate actually returned
                elapsed -= step_ms;
            }
            break;
        }
        std::mem::swap(&mut params, &mut next);
        iterations = t + 1;
    }

    if last_recorded != Some(iterations) {
        rec.record(iterations, &params, None, elapsed)?;
    }
    Ok(SolverRun { final_params: params, trace: rec.trace, converged, iterations_used: iterations })
}

struct GdUpdate<'a> {
    data: &'a Dataset,
    step: f64,
    grad: Vec<f64>,
}

impl Update for GdUpdate<'_> {
    const COUNTS_FIXED_POINT_STEP: bool = false;

    fn step(&mut self, current: &ModelParams, next: &mut ModelParams) -> Result<StepOutcome> {
        let loss = loss_and_gradient_into(current, self.data, &mut self.grad);
        for ((n, c), g) in next.as_mut_slice().iter_mut().zip(current.as_slice()).zip(&self.grad) {
            *n = c - self.step * g;
        }
        Ok(StepOutcome { loss_before: Some(loss) })
    }
}

struct SgdUpdate<'a, S> {
    data: &'a Dataset,
    step: f64,
    grad: Vec<f64>,
    batch: Vec<usize>,
    sampler: S,
}

impl<S: BatchSampler> Update for SgdUpdate<'_, S> {
    const COUNTS_FIXED_POINT_STEP: bool = false;

    fn step(&mut self, current: &ModelParams, next: &mut ModelParams) -> Result<StepOutcome> {
        self.sampler.fill(self.data.n(), &mut self.batch);
        minibatch_gradient_into(current, self.data, &self.batch, &mut self.grad);
        for ((n, c), g) in next.as_mut_slice().iter_mut().zip(current.as_slice()).zip(&self.grad) {
            *n = c - self.step * g;
        }
        Ok(StepOutcome { loss_before: None })
    }
}

struct AmUpdate<'a> {
    data: &'a Dataset,
}

impl Update for AmUpdate<'_> {
    const COUNTS_FIXED_POINT_STEP: bool = true;

    fn step(&mut self, current: &ModelParams, next: &mut ModelParams) -> Result<StepOutcome> {
        let part = assign_cells(current, self.data)?;
        for (j, members) in part.members().iter().enumerate() {
            if members.is_empty() {
                // empty cell: keep the previous block
                next.block_mut(j).copy_from_slice(current.block(j));
            } else {
                let fit = cell_least_squares(self.data, members);
                next.block_mut(j).copy_from_slice(&fit);
            }
        }
        Ok(StepOutcome { loss_before: None })
    }
}

fn require(config: &SolverConfig, algorithm: Algorithm) -> Result<()> {
    if config.algorithm != algorithm {
        return Err(Error::input(format!(
            "config is for {}, but {} was requested",
            config.algorithm, algorithm
        )));
    }
    Ok(())
}

/// Constant-step gradient descent `beta <- beta - mu * grad`.
pub fn run_gd(data: &Dataset, init: &ModelParams, config: &SolverConfig, truth: Option<&ModelParams>) -> Result<SolverRun> {
    require(config, Algorithm::Gd)?;
    let update = GdUpdate { data, step: config.effective_step_size(data.d()), grad: vec![0.0; init.as_slice().len()] };
    drive(data, init, config, truth, update)
}

/// Mini-batch SGD with `m` indices drawn uniformly with replacement per step,
/// from a stream seeded by `config.seed`.
pub fn run_sgd(data: &Dataset, init: &ModelParams, config: &SolverConfig, truth: Option<&ModelParams>) -> Result<SolverRun> {
    let sampler = UniformSampler::new(child_rng(config.seed, &[0x7367_6462]));
    run_sgd_with_sampler(data, init, config, truth, sampler)
}

pub fn run_sgd_with_sampler<S: BatchSampler>(
    data: &Dataset,
    init: &ModelParams,
    config: &SolverConfig,
    truth: Option<&ModelParams>,
    sampler: S,
) -> Result<SolverRun> {
    require(config, Algorithm::Sgd)?;
    let update = SgdUpdate {
        data,
        step: config.effective_step_size(data.d()),
        grad: vec![0.0; init.as_slice().len()],
        batch: vec![0; config.batch_size.max(1)],
        sampler,
    };
    drive(data, init, config, truth, update)
}

/// Alternating minimization: partition by the current maximizers, then refit
/// each nonempty cell by ordinary least squares.
pub fn run_am(data: &Dataset, init: &ModelParams, config: &SolverConfig, truth: Option<&ModelParams>) -> Result<SolverRun> {
    require(config, Algorithm::Am)?;
    drive(data, init, config, truth, AmUpdate { data })
}

pub fn run(data: &Dataset, init: &ModelParams, config: &SolverConfig, truth: Option<&ModelParams>) -> Result<SolverRun> {
    match config.algorithm {
        Algorithm::Gd => run_gd(data, init, config, truth),
        Algorithm::Sgd => run_sgd(data, init, config, truth),
        Algorithm::Am => run_am(data, init, config, truth),
    }
}

/// Minimum-norm least-squares fit of `y` on `[x; 1]` over the given rows.
///
/// Uses a Cholesky solve of the normal equations when the Gram matrix is
/// comfortably positive definite and falls back to an SVD pseudo-inverse of
/// the design matrix otherwise.
pub fn cell_least_squares(data: &Dataset, rows: &[usize]) -> Vec<f64> {
    let w = data.d() + 1;
    if rows.len() >= w {
        // column-major lower triangle of sum xi xi^T
        let mut g = vec![0.0; w * w];
        let mut rhs = DVector::<f64>::zeros(w);
        let mut xi = vec![0.0; w];
        xi[w - 1] = 1.0;
        for &i in rows {
            xi[..w - 1].copy_from_slice(data.x(i));
            let y = data.y(i);
            for c in 0..w {
                let xc = xi[c];
                rhs[c] += xc * y;
                crate::linalg::axpy(xc, &xi[c..], &mut g[c * w + c..(c + 1) * w]);
            }
        }
        let mut gram = DMatrix::from_vec(w, w, g);
        gram.fill_upper_triangle_with_lower_triangle();
        if let Some(chol) = gram.clone().cholesky() {
            let diag = chol.l_dirty().diagonal();
            let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            // squared pivot ratio bounds the reciprocal condition number from above
            if lo > 0.0 && (lo / hi).powi(2) > 1e-10 {
                return chol.solve(&rhs).iter().copied().collect();
            }
        }
    }
    let design = DMatrix::<f64>::from_fn(rows.len(), w, |r, c| if c + 1 == w { 1.0 } else { data.x(rows[r])[c] });
    let y = DVector::<f64>::from_iterator(rows.len(), rows.iter().map(|&i| data.y(i)));
    min_norm_lstsq(design, &y)
}

fn min_norm_lstsq(design: DMatrix<f64>, y: &DVector<f64>) -> Vec<f64> {
    let (r, c) = design.shape();
    let svd = design.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = smax * (r.max(c) as f64) * f64::EPSILON;
    svd.solve(y, eps).expect("both singular vector sets were computed").iter().copied().collect()
}
