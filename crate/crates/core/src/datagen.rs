//! Synthetic teacher models, covariates, noisy responses, and Monte-Carlo
//! estimates of the ground-truth cell geometry.
//!
//! All three covariate laws are standardized to zero mean and unit variance
//! per coordinate. They are sub-Gaussian and satisfy a polynomial small-ball
//! bound on affine marginals; the Gaussian law has small-ball exponent 1/2.
//! Constants for the other laws are nominal only.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Beta, Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, ModelParams};
use crate::rng::{child_rng, SolverRng};

/// Distribution of each covariate coordinate (i.i.d. across coordinates).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CovariateLaw {
    StandardGaussian,
    /// Uniform on `[-sqrt(3), sqrt(3)]`.
    UniformCube,
    /// `Beta(a, b)` shifted and scaled to unit variance.
    BetaIid { a: f64, b: f64 },
}

impl CovariateLaw {
    pub fn beta(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::input(format!("beta law needs a, b > 0, got ({a}, {b})")));
        }
        Ok(CovariateLaw::BetaIid { a, b })
    }

    /// Small-ball exponent; only the Gaussian value is certified.
    pub fn nominal_zeta(&self) -> f64 {
        0.5
    }

    pub fn sample_into(&self, rng: &mut SolverRng, out: &mut [f64]) {
        match *self {
            CovariateLaw::StandardGaussian => {
                for v in out.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
            }
            CovariateLaw::UniformCube => {
                let h = 3f64.sqrt();
                for v in out.iter_mut() {
                    *v = rng.random_range(-h..h);
                }
            }
            CovariateLaw::BetaIid { a, b } => {
                let dist = Beta::new(a, b).expect("validated beta parameters");
                let mean = a / (a + b);
                let sd = (a * b / ((a + b) * (a + b) * (a + b + 1.0))).sqrt();
                for v in out.iter_mut() {
                    let s: f64 = dist.sample(rng);
                    *v = (s - mean) / sd;
                }
            }
        }
    }
}

impl fmt::Display for CovariateLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovariateLaw::StandardGaussian => write!(f, "gaussian"),
            CovariateLaw::UniformCube => write!(f, "uniform"),
            CovariateLaw::BetaIid { a, b } => write!(f, "beta({a},{b})"),
        }
    }
}

impl FromStr for CovariateLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "gaussian" | "normal" | "standard_gaussian" => return Ok(CovariateLaw::StandardGaussian),
            "uniform" | "uniform_cube" => return Ok(CovariateLaw::UniformCube),
            _ => {}
        }
        let inner = t
            .strip_prefix("beta(")
            .or_else(|| t.strip_prefix("beta_iid("))
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::input(format!("unknown covariate law '{s}'")))?;
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::input(format!("beta law needs two parameters: '{s}'")));
        }
        let parse = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::input(format!("bad beta parameter '{p}'")))
        };
        CovariateLaw::beta(parse(parts[0])?, parse(parts[1])?)
    }
}

impl TryFrom<String> for CovariateLaw {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CovariateLaw> for String {
    fn from(l: CovariateLaw) -> String {
        l.to_string()
    }
}

/// `k` random pairwise-orthogonal unit slopes with zero offsets.
pub fn gen_truth_orthonormal(k: usize, d: usize, seed: u64) -> Result<ModelParams> {
    if k == 0 || k > d {
        return Err(Error::input(format!("orthonormal truth needs 1 <= k <= d, got k={k}, d={d}")));
    }
    let mut rng = child_rng(seed, &[0x7275_7468]);
    let g = DMatrix::<f64>::from_fn(d, k, |_, _| rng.sample(StandardNormal));
    let q = g.qr().q();
    let mut blocks = Vec::with_capacity(k);
    for j in 0..k {
        let mut b: Vec<f64> = q.column(j).iter().copied().collect();
        b.push(0.0);
        blocks.push(b);
    }
    ModelParams::from_blocks(&blocks)
}

/// `k` independent uniform unit-sphere slopes with zero offsets.
pub fn gen_truth_sphere(k: usize, d: usize, seed: u64) -> Result<ModelParams> {
    if k == 0 || d == 0 {
        return Err(Error::input(format!("need k, d >= 1, got k={k}, d={d}")));
    }
    let mut rng = child_rng(seed, &[0x7370_6872]);
    let mut blocks = Vec::with_capacity(k);
    for _ in 0..k {
        let mut v: Vec<f64>;
        loop {
            v = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let nrm = crate::linalg::norm(&v);
            if nrm > 1e-12 {
                v.iter_mut().for_each(|x| *x /= nrm);
                break;
            }
        }
        v.push(0.0);
        blocks.push(v);
    }
    ModelParams::from_blocks(&blocks)
}

/// Draws `n` covariates from `law` and responses `y_i = f(x_i) + z_i`, `z_i ~ N(0, sigma^2)`.
pub fn gen_dataset(truth: &ModelParams, law: CovariateLaw, n: usize, sigma: f64, seed: u64) -> Result<Dataset> {
    gen_dataset_with_noise(truth, law, n, sigma, seed).map(|(data, _)| data)
}

/// As [`gen_dataset`], also returning the noise realizations `z_i`.
///
/// Covariates and noise come from separate child streams, so the same seed
/// gives the same covariates at every noise level.
pub fn gen_dataset_with_noise(
    truth: &ModelParams,
    law: CovariateLaw,
    n: usize,
    sigma: f64,
    seed: u64,
) -> Result<(Dataset, Vec<f64>)> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::input(format!("noise level must be finite and >= 0, got {sigma}")));
    }
    let d = truth.d();
    let mut xrng = child_rng(seed, &[0x636f_7661]);
    let mut zrng = child_rng(seed, &[0x6e6f_6973]);
    let mut cov = vec![0.0; n * d];
    for row in cov.chunks_exact_mut(d) {
        law.sample_into(&mut xrng, row);
    }
    let noise: Vec<f64> = if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("valid sigma");
        (0..n).map(|_| normal.sample(&mut zrng)).collect()
    } else {
        vec![0.0; n]
    };
    let y = cov
        .chunks_exact(d)
        .zip(&noise)
        .map(|(x, z)| truth.argmax(x).1 + z)
        .collect();
    Ok((Dataset::new(d, cov, y, sigma)?, noise))
}

/// Cell probabilities and slope separation of a ground truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruthGeometry {
    pub pi_min: f64,
    pub pi_max: f64,
    /// Minimum pairwise slope distance; infinite when `k = 1`.
    pub kappa: f64,
    pub cell_frequencies: Vec<f64>,
    pub mc_samples: usize,
    /// Largest per-cell normal-approximation binomial half-width at [`GEOMETRY_CI_Z`].
    pub ci_halfwidth: f64,
}

/// Two-sided 99.9% normal quantile used for the cell-frequency intervals.
pub const GEOMETRY_CI_Z: f64 = 3.290_526_731_491_926;

/// Minimum pairwise Euclidean distance between slope vectors.
pub fn slope_separation(truth: &ModelParams) -> f64 {
    let mut best = f64::INFINITY;
    for j in 0..truth.k() {
        for l in j + 1..truth.k() {
            best = best.min(crate::linalg::sq_dist(truth.slope(j), truth.slope(l)).sqrt());
        }
    }
    best
}

pub fn estimate_geometry(
    truth: &ModelParams,
    law: CovariateLaw,
    mc_samples: usize,
    seed: u64,
) -> Result<GroundTruthGeometry> {
    if mc_samples < 1000 {
        return Err(Error::input(format!("need at least 1000 Monte-Carlo samples, got {mc_samples}")));
    }
    let k = truth.k();
    let mut rng = child_rng(seed, &[0x6765_6f6d]);
    let mut counts = vec![0usize; k];
    let mut x = vec![0.0; truth.d()];
    for _ in 0..mc_samples {
        law.sample_into(&mut rng, &mut x);
        counts[truth.argmax(&x).0] += 1;
    }
    let nf = mc_samples as f64;
    let cell_frequencies: Vec<f64> = counts.iter().map(|&c| c as f64 / nf).collect();
    let ci_halfwidth = cell_frequencies
        .iter()
        .map(|&p| GEOMETRY_CI_Z * (p * (1.0 - p) / nf).sqrt())
        .fold(0.0, f64::max);
    let pi_min = cell_frequencies.iter().cloned().fold(f64::INFINITY, f64::min);
    let pi_max = cell_frequencies.iter().cloned().fold(0.0, f64::max);
    Ok(GroundTruthGeometry {
        pi_min,
        pi_max,
        kappa: slope_separation(truth),
        cell_frequencies,
        mc_samples,
        ci_halfwidth,
    })
}
