//! Closed-form quantities from the local convergence guarantees for GD and
//! mini-batch SGD, and an exhaustive small-sample diagnostic for the
//! worst-case subset minimum eigenvalue.
//!
//! The guarantees hold with unspecified absolute constants (`C`, `C'`, `nu`);
//! these are always explicit arguments here and never defaulted.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;

/// Largest sample count accepted by [`worst_subset_min_eig`].
pub const MAX_EXHAUSTIVE_N: usize = 14;

const FIXED_POINT_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    pub k: usize,
    pub d: usize,
    pub n: usize,
    pub sigma: f64,
    /// Failure probability, in `(0, 1/e)`.
    pub delta: f64,
    pub pi_min: f64,
    pub kappa: f64,
    /// Small-ball exponent; 1/2 for Gaussian covariates.
    pub zeta: f64,
    /// Small-ball constant; carried for reporting, unused by the formulas.
    pub gamma: f64,
    /// Neighborhood constant `R`.
    pub r_const: f64,
}

impl TheoryInputs {
    pub fn new(k: usize, d: usize, n: usize, sigma: f64, delta: f64, pi_min: f64, kappa: f64) -> Self {
        TheoryInputs { k, d, n, sigma, delta, pi_min, kappa, zeta: 0.5, gamma: 1.0, r_const: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.d == 0 || self.n == 0 {
            return Err(Error::input("k, d, n must all be >= 1"));
        }
        if !(self.delta > 0.0 && self.delta < (-1.0f64).exp()) {
            return Err(Error::input(format!("delta must lie in (0, 1/e), got {}", self.delta)));
        }
        if !(self.pi_min > 0.0 && self.pi_min <= 1.0 / self.k as f64) {
            return Err(Error::input(format!("pi_min must lie in (0, 1/k], got {}", self.pi_min)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::input(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::input(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(Error::input(format!("zeta must be > 0, got {}", self.zeta)));
        }
        if !(self.r_const > 0.0 && self.r_const.is_finite()) {
            return Err(Error::input(format!("R must be > 0, got {}", self.r_const)));
        }
        Ok(())
    }

    fn inv_zeta(&self) -> f64 {
        1.0 / self.zeta
    }

    /// `kd log(n/d) + log(k/delta)`, the complexity factor shared by several bounds.
    fn complexity(&self, n: f64) -> f64 {
        let (k, d) = (self.k as f64, self.d as f64);
        k * d * (n / d).ln() + (k / self.delta).ln()
    }
}

/// Neighborhood radius multiplier:
/// `min( R p / (4 k^{1/zeta}) * log^{-1/2}(k^{1/zeta} / (R p)), 1/4 )`
/// with `p = pi_min^{(1/zeta)(1 + 1/zeta)}`.
pub fn compute_rho(inputs: &TheoryInputs) -> Result<f64> {
    inputs.validate()?;
    let a = inputs.inv_zeta();
    let p = inputs.pi_min.powf(a * (1.0 + a));
    let ka = (inputs.k as f64).powf(a);
    let arg = ka / (inputs.r_const * p);
    if !(arg > 1.0) {
        return Err(Error::FormulaDomain(format!(
            "rho undefined: log argument k^(1/zeta) / (R pi_min^...) = {arg} is not > 1"
        )));
    }
    let first = inputs.r_const * p / (4.0 * ka) / arg.ln().sqrt();
    Ok(first.min(0.25))
}

/// Noise term `C' sigma k sqrt(k (kd log(n/d) + log(k/delta)) / n)` of the GD bound.
pub fn gd_noise_term(inputs: &TheoryInputs, c_prime: f64) -> Result<f64> {
    inputs.validate()?;
    let n = inputs.n as f64;
    let inner = inputs.k as f64 * inputs.complexity(n) / n;
    if inner < 0.0 {
        return Err(Error::FormulaDomain(format!("GD bound undefined: negative complexity term at n={}", inputs.n)));
    }
    Ok(c_prime * inputs.sigma * inputs.k as f64 * inner.sqrt())
}

/// `nu^t * init_dist + C' sigma k sqrt(k (kd log(n/d) + log(k/delta)) / n)`.
pub fn gd_error_bound(inputs: &TheoryInputs, t: u32, init_dist: f64, nu: f64, c_prime: f64) -> Result<f64> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::input(format!("contraction factor must lie in (0, 1), got {nu}")));
    }
    if !(init_dist >= 0.0) {
        return Err(Error::input("initial distance must be >= 0"));
    }
    Ok(nu.powi(t as i32) * init_dist + gd_noise_term(inputs, c_prime)?)
}

/// The two branches of the SGD floor: `((d + log(n/delta))/m, (kd log(n/d) + log(1/delta))/n)`.
pub fn sgd_floor_branches(inputs: &TheoryInputs, m: usize) -> Result<(f64, f64)> {
    inputs.validate()?;
    if m == 0 {
        return Err(Error::input("batch size must be >= 1"));
    }
    let (k, d, n) = (inputs.k as f64, inputs.d as f64, inputs.n as f64);
    let batch = (d + (n / inputs.delta).ln()) / m as f64;
    let sample = (k * d * (n / d).ln() + (1.0 / inputs.delta).ln()) / n;
    Ok((batch, sample))
}

/// `C' sigma k sqrt( (d + log(n/delta))/m  ∨  (kd log(n/d) + log(1/delta))/n )`.
pub fn sgd_error_floor(inputs: &TheoryInputs, m: usize, c_prime: f64) -> Result<f64> {
    let (batch, sample) = sgd_floor_branches(inputs, m)?;
    let inner = batch.max(sample);
    if inner < 0.0 {
        return Err(Error::FormulaDomain("SGD floor undefined: negative variance term".into()));
    }
    Ok(c_prime * inputs.sigma * inputs.k as f64 * inner.sqrt())
}

/// Right-hand side of the GD sample-size condition evaluated at a trial `n`.
pub fn sample_complexity_rhs(inputs: &TheoryInputs, c: f64, n: f64) -> Result<f64> {
    let rho = compute_rho(inputs)?;
    let a = inputs.inv_zeta();
    let pi = inputs.pi_min;
    let k = inputs.k as f64;
    let k_branch = k.powf(1.5) * pi.powf(-(1.0 + a));
    let noise_branch = inputs.sigma / (inputs.kappa * rho);
    let lead = c * pi.powf(-2.0 * (1.0 + a)) * k_branch.max(noise_branch).powi(2);
    Ok(lead * inputs.complexity(n))
}

/// Smallest self-consistent `n` with `n = RHS(n)`, found by iterating
/// `n <- RHS(n)` from `n0 = kd`. `inputs.n` is ignored.
pub fn sample_complexity_gd(inputs: &TheoryInputs, c: f64) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::input(format!("constant C must be > 0, got {c}")));
    }
    let mut n = (inputs.k * inputs.d) as f64;
    for _ in 0..FIXED_POINT_MAX_ITERS {
        let next = sample_complexity_rhs(inputs, c, n)?;
        if !(next.is_finite() && next > 0.0) {
            return Err(Error::FormulaDomain(format!("sample-size fixed point left the domain (n -> {next})")));
        }
        if (next - n).abs() <= 4.0 * f64::EPSILON * next {
            return Ok(next);
        }
        n = next;
    }
    Err(Error::FormulaDomain(format!(
        "sample-size fixed point did not converge within {FIXED_POINT_MAX_ITERS} iterations (last n = {n})"
    )))
}

/// Result of the exhaustive subset search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetEigReport {
    /// Infimum of `lambda_min(sum_{i in I} xi_i xi_i^T)` over `|I| >= ceil(alpha n)`;
    /// `+inf` when no subset qualifies.
    pub value: f64,
    pub vacuous: bool,
    pub subset_size: usize,
    pub subsets_checked: usize,
    pub argmin: Vec<usize>,
}

/// `lambda_min(sum_{i in rows} [x_i;1][x_i;1]^T)`.
pub fn min_eigenvalue_of_rows(data: &Dataset, rows: &[usize]) -> f64 {
    let w = data.d() + 1;
    let mut g = DMatrix::<f64>::zeros(w, w);
    let mut xi = vec![1.0; w];
    for &i in rows {
        xi[..w - 1].copy_from_slice(data.x(i));
        for c in 0..w {
            for r in 0..w {
                g[(r, c)] += xi[r] * xi[c];
            }
        }
    }
    SymmetricEigen::new(g).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Indices set in `mask`, in increasing order.
pub fn mask_to_rows(mask: u32) -> Vec<usize> {
    (0..32).filter(|b| mask >> b & 1 == 1).collect()
}

/// Exact worst case over subsets of size at least `ceil(alpha n)`.
///
/// Only subsets of exactly that size are scanned: adding a sample adds a PSD
/// rank-one term, which cannot lower the minimum eigenvalue.
pub fn worst_subset_min_eig(data: &Dataset, alpha: f64) -> Result<SubsetEigReport> {
    let n = data.n();
    if n > MAX_EXHAUSTIVE_N {
        return Err(Error::input(format!(
            "exhaustive subset search is limited to n <= {MAX_EXHAUSTIVE_N}, got n={n}"
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::input(format!("alpha must be positive, got {alpha}")));
    }
    let size = (alpha * n as f64).ceil() as usize;
    if size > n {
        return Ok(SubsetEigReport { value: f64::INFINITY, vacuous: true, subset_size: size, subsets_checked: 0, argmin: vec![] });
    }
    let mut best = f64::INFINITY;
    let mut argmin = 0u32;
    let mut checked = 0usize;
    let limit = 1u32 << n;
    // Gosper's hack over all n-bit masks with `size` bits set
    let mut mask: u32 = if size == 0 { 0 } else { (1u32 << size) - 1 };
    loop {
        let v = min_eigenvalue_of_rows(data, &mask_to_rows(mask));
        checked += 1;
        if v < best {
            best = v;
            argmin = mask;
        }
        if mask == 0 {
            break;
        }
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
        if mask >= limit {
            break;
        }
    }
    Ok(SubsetEigReport { value: best, vacuous: false, subset_size: size, subsets_checked: checked, argmin: mask_to_rows(argmin) })
}
