//! Starting points for the local solvers.
//!
//! [`perturb_init`] draws a point inside the per-block ball of radius
//! `kappa * rho` around a known ground truth. [`moment_init`] needs no truth:
//! it estimates the slope subspace from first and second response-weighted
//! moments of the covariates, then fits a low-dimensional max-affine model in
//! that subspace by alternating minimization with fixed restarts.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, ModelParams};
use crate::rng::child_rng;
use crate::solvers::{cell_least_squares, run_am, SolverConfig};

/// Per-block neighborhood `max_j |beta_j - beta_j*| <= kappa * rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodSpec {
    pub rho: f64,
    pub kappa: f64,
}

impl NeighborhoodSpec {
    pub fn new(rho: f64, kappa: f64) -> Result<Self> {
        let spec = NeighborhoodSpec { rho, kappa };
        spec.validate()?;
        Ok(spec)
    }

    pub fn per_block_radius(&self) -> f64 {
        self.kappa * self.rho
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.25).contains(&self.rho) {
            return Err(Error::input(format!("rho must lie in [0, 1/4], got {}", self.rho)));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::input(format!("kappa must be finite and >= 0, got {}", self.kappa)));
        }
        Ok(())
    }

    /// Membership test for the neighborhood around `truth`.
    pub fn contains(&self, params: &ModelParams, truth: &ModelParams) -> bool {
        params.k() == truth.k()
            && params.d() == truth.d()
            && (0..truth.k())
                .all(|j| crate::linalg::sq_dist(params.block(j), truth.block(j)).sqrt() <= self.per_block_radius())
    }
}

/// `beta_j^0 = beta_j* + u_j` with `u_j` a uniform direction in `R^{d+1}` scaled
/// by a uniform radius in `[0, kappa * rho]`.
pub fn perturb_init(truth: &ModelParams, spec: &NeighborhoodSpec, seed: u64) -> Result<ModelParams> {
    spec.validate()?;
    let radius = spec.per_block_radius();
    let mut out = truth.clone();
    if radius == 0.0 {
        return Ok(out);
    }
    let mut rng = child_rng(seed, &[0x7065_7274]);
    let w = truth.block_len();
    let mut u = vec![0.0; w];
    for j in 0..truth.k() {
        let norm = loop {
            u.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            let nrm = crate::linalg::norm(&u);
            if nrm > 1e-12 {
                break nrm;
            }
        };
        // shrink by a relative 1e-9 so rounding in the sum cannot leave the ball
        let r = rng.random::<f64>() * radius * (1.0 - 1e-9);
        for (b, v) in out.block_mut(j).iter_mut().zip(&u) {
            *b += r * v / norm;
        }
    }
    Ok(out)
}

const MOMENT_RESTARTS: u64 = 16;
const MOMENT_SEED: u64 = 0x6d6f_6d65_6e74;

/// Orthonormal `d x r` basis (`r = min(k, d)`) of the estimated slope subspace.
///
/// The first direction is the response-weighted mean `(1/n) sum (y_i - ybar) x_i`;
/// the rest are eigenvectors of `(1/n) sum (y_i - ybar) x_i x_i^T`, taken in
/// decreasing order of eigenvalue magnitude.
pub fn moment_subspace(data: &Dataset, k: usize) -> Result<DMatrix<f64>> {
    let (n, d) = (data.n(), data.d());
    if n == 0 || k == 0 {
        return Err(Error::input("moment initialization needs n >= 1 and k >= 1"));
    }
    let nf = n as f64;
    let ybar = data.responses().iter().sum::<f64>() / nf;
    let xs = DMatrix::from_row_slice(n, d, data.covariates());

    let cov = xs.transpose() * &xs / nf;
    let cov_eigs = SymmetricEigen::new(cov).eigenvalues;
    let top = cov_eigs.iter().cloned().fold(0.0, f64::max);
    let rank = cov_eigs.iter().filter(|&&e| e > 1e-10 * top.max(f64::MIN_POSITIVE)).count();
    if rank < k.min(d) {
        return Err(Error::Init(format!("covariate second moment has rank {rank} < {}", k.min(d))));
    }

    let w: Vec<f64> = data.responses().iter().map(|y| y - ybar).collect();
    let mut weighted = xs.clone();
    for (mut row, wi) in weighted.row_iter_mut().zip(&w) {
        row *= *wi;
    }
    let first = weighted.transpose() * DMatrix::from_element(n, 1, 1.0 / nf);
    let second = weighted.transpose() * &xs / nf;
    let eig = SymmetricEigen::new(second);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()));

    let r = k.min(d);
    let mut basis: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(r);
    let candidates = std::iter::once(first.column(0).into_owned())
        .chain(order.iter().map(|&c| eig.eigenvectors.column(c).into_owned()));
    for mut v in candidates {
        if basis.len() == r {
            break;
        }
        for b in &basis {
            let c = b.dot(&v);
            v -= b * c;
        }
        let nrm = v.norm();
        if nrm > 1e-8 {
            basis.push(v / nrm);
        }
    }
    if basis.len() < r {
        return Err(Error::Init("could not assemble a slope subspace of full dimension".into()));
    }
    Ok(DMatrix::from_columns(&basis))
}

/// Truth-free initializer; deterministic given the data.
pub fn moment_init(data: &Dataset, k: usize) -> Result<ModelParams> {
    let (n, d) = (data.n(), data.d());
    if k == 0 || n < k * (d + 1) {
        return Err(Error::input(format!("moment initialization needs n >= k(d+1) = {}, got n={n}", k * (d + 1))));
    }
    if k == 1 {
        let rows: Vec<usize> = (0..n).collect();
        return ModelParams::from_flat(1, d, cell_least_squares(data, &rows));
    }

    let basis = moment_subspace(data, k)?;
    let r = basis.ncols();
    let xs = DMatrix::from_row_slice(n, d, data.covariates());
    let reduced = &xs * &basis;
    let mut flat = Vec::with_capacity(n * r);
    for i in 0..n {
        flat.extend(reduced.row(i).iter());
    }
    let low = Dataset::new(r, flat, data.responses().to_vec(), data.sigma())?;

    let scale = {
        let nf = n as f64;
        let mean = data.responses().iter().sum::<f64>() / nf;
        (data.responses().iter().map(|y| (y - mean).powi(2)).sum::<f64>() / nf).sqrt().max(1e-12)
    };
    let config = SolverConfig { max_iters: 50, tol: 1e-10, ..SolverConfig::am() };
    let mut rng = child_rng(MOMENT_SEED, &[]);
    let mut best: Option<(f64, ModelParams)> = None;
    for _ in 0..MOMENT_RESTARTS {
        let start: Vec<f64> = (0..k * (r + 1))
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let start = ModelParams::from_flat(k, r, start)?;
        let fitted = match run_am(&low, &start, &config, None) {
            Ok(run) => run.final_params,
            Err(Error::Diverged { last_finite, .. }) => *last_finite,
            Err(e) => return Err(e),
        };
        let loss = crate::objective::loss_unchecked(&fitted, &low);
        if best.as_ref().is_none_or(|(l, _)| loss < *l) {
            best = Some((loss, fitted));
        }
    }
    let (_, low_params) = best.expect("at least one restart");

    let mut blocks = Vec::with_capacity(k);
    for j in 0..k {
        let coef = nalgebra::DVector::from_column_slice(low_params.slope(j));
        let mut b: Vec<f64> = (&basis * coef).iter().copied().collect();
        b.push(low_params.offset(j));
        blocks.push(b);
    }
    ModelParams::from_blocks(&blocks)
}
