//! Parameter and data containers for the max-affine model
//! `f(x) = max_j (<x, theta_j> + b_j)`, plus model evaluation and the
//! maximizing-cell assignment with smallest-index tie-breaking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;

/// Stacked parameters of `k` affine pieces in dimension `d`.
///
/// Block `j` is stored contiguously as `[theta_j (d entries); b_j]`, so the
/// whole vector is the `k(d+1)` stacking used throughout the solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr", into = "ParamsRepr")]
pub struct ModelParams {
    k: usize,
    d: usize,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ParamsRepr {
    k: usize,
    d: usize,
    blocks: Vec<Vec<f64>>,
}

impl TryFrom<ParamsRepr> for ModelParams {
    type Error = Error;

    fn try_from(r: ParamsRepr) -> Result<Self> {
        let p = ModelParams::from_blocks(&r.blocks)?;
        if p.k != r.k || p.d != r.d {
            return Err(Error::input(format!(
                "declared shape k={}, d={} does not match blocks (k={}, d={})",
                r.k, r.d, p.k, p.d
            )));
        }
        Ok(p)
    }
}

impl From<ModelParams> for ParamsRepr {
    fn from(p: ModelParams) -> Self {
        ParamsRepr {
            k: p.k,
            d: p.d,
            blocks: p.blocks().map(<[f64]>::to_vec).collect(),
        }
    }
}

impl ModelParams {
    pub fn zeros(k: usize, d: usize) -> Result<Self> {
        Self::from_flat(k, d, vec![0.0; k * (d + 1)])
    }

    pub fn from_flat(k: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(Error::input(format!("need k >= 1 and d >= 1, got k={k}, d={d}")));
        }
        if values.len() != k * (d + 1) {
            return Err(Error::input(format!(
                "expected {} parameters for k={k}, d={d}, got {}",
                k * (d + 1),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("parameters must be finite"));
        }
        Ok(ModelParams { k, d, values })
    }

    /// Builds parameters from `k` blocks of length `d+1` (slopes then offset).
    pub fn from_blocks<B: AsRef<[f64]>>(blocks: &[B]) -> Result<Self> {
        let k = blocks.len();
        if k == 0 {
            return Err(Error::input("at least one affine piece is required"));
        }
        let len = blocks[0].as_ref().len();
        if len < 2 {
            return Err(Error::input("blocks need at least one slope and one offset"));
        }
        let mut values = Vec::with_capacity(k * len);
        for (j, b) in blocks.iter().enumerate() {
            let b = b.as_ref();
            if b.len() != len {
                return Err(Error::input(format!(
                    "block {j} has length {}, expected {len}",
                    b.len()
                )));
            }
            values.extend_from_slice(b);
        }
        Self::from_flat(k, len - 1, values)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn block_len(&self) -> usize {
        self.d + 1
    }

    pub fn block(&self, j: usize) -> &[f64] {
        let w = self.d + 1;
        &self.values[j * w..(j + 1) * w]
    }

    pub fn block_mut(&mut self, j: usize) -> &mut [f64] {
        let w = self.d + 1;
        &mut self.values[j * w..(j + 1) * w]
    }

    pub fn slope(&self, j: usize) -> &[f64] {
        &self.block(j)[..self.d]
    }

    pub fn offset(&self, j: usize) -> f64 {
        self.block(j)[self.d]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d + 1)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Returns a copy with blocks reordered so that new block `j` is old block `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if !is_permutation(perm, self.k) {
            return Err(Error::input(format!("{perm:?} is not a permutation of 0..{}", self.k)));
        }
        let mut values = Vec::with_capacity(self.values.len());
        for &p in perm {
            values.extend_from_slice(self.block(p));
        }
        Ok(ModelParams { values, ..*self })
    }

    /// Euclidean distance of the stacked vectors, without block matching.
    pub fn distance(&self, other: &ModelParams) -> f64 {
        crate::linalg::sq_dist(&self.values, &other.values).sqrt()
    }

    /// Score `<[x; 1], beta_j>` of piece `j`.
    #[inline]
    pub fn score(&self, j: usize, x: &[f64]) -> f64 {
        let b = self.block(j);
        dot(&b[..self.d], x) + b[self.d]
    }

    /// Maximizing piece for `x` (smallest index among ties) and its score.
    #[inline]
    pub(crate) fn argmax(&self, x: &[f64]) -> (usize, f64) {
        let mut best = 0;
        let mut best_score = self.score(0, x);
        for j in 1..self.k {
            let s = self.score(j, x);
            // strict: an index only wins over all smaller ones when it is strictly larger
            if s > best_score {
                best = j;
                best_score = s;
            }
        }
        (best, best_score)
    }

    /// Evaluates `max_j (<x, theta_j> + b_j)`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::input(format!(
                "covariate has length {}, model expects {}",
                x.len(),
                self.d
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("covariate must be finite"));
        }
        Ok(self.argmax(x).1)
    }
}

pub(crate) fn is_permutation(perm: &[usize], k: usize) -> bool {
    if perm.len() != k {
        return false;
    }
    let mut seen = vec![false; k];
    for &p in perm {
        if p >= k || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}

/// Covariates `x_i` (row-major, `n x d`) and responses `y_i`.
///
/// The lifted vector `[x_i; 1]` is never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    covariates: Vec<f64>,
    responses: Vec<f64>,
    sigma: f64,
}

impl Dataset {
    pub fn new(d: usize, covariates: Vec<f64>, responses: Vec<f64>, sigma: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::input("covariate dimension must be >= 1"));
        }
        if !covariates.len().is_multiple_of(d) {
            return Err(Error::input(format!(
                "covariate buffer of length {} is not a multiple of d={d}",
                covariates.len()
            )));
        }
        let n = covariates.len() / d;
        if responses.len() != n {
            return Err(Error::input(format!(
                "{n} covariate rows but {} responses",
                responses.len()
            )));
        }
        if covariates.iter().chain(&responses).any(|v| !v.is_finite()) {
            return Err(Error::input("dataset entries must be finite"));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::input(format!("noise level must be finite and >= 0, got {sigma}")));
        }
        Ok(Dataset { n, d, covariates, responses, sigma })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], responses: Vec<f64>, sigma: f64) -> Result<Self> {
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut flat = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            if r.as_ref().len() != d {
                return Err(Error::input(format!("row {i} has inconsistent length")));
            }
            flat.extend_from_slice(r.as_ref());
        }
        Self::new(d, flat, responses, sigma)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    #[inline]
    pub fn x(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        self.responses[i]
    }

    pub fn covariates(&self) -> &[f64] {
        &self.covariates
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    /// Same covariates with a different response vector.
    pub fn with_responses(&self, responses: Vec<f64>) -> Result<Self> {
        Dataset::new(self.d, self.covariates.clone(), responses, self.sigma)
    }

    /// Subset of rows, in the given order (repeats allowed).
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let mut cov = Vec::with_capacity(rows.len() * self.d);
        let mut resp = Vec::with_capacity(rows.len());
        for &i in rows {
            if i >= self.n {
                return Err(Error::input(format!("row {i} out of range for n={}", self.n)));
            }
            cov.extend_from_slice(self.x(i));
            resp.push(self.y(i));
        }
        Dataset::new(self.d, cov, resp, self.sigma)
    }
}

pub(crate) fn check_dims(params: &ModelParams, data: &Dataset) -> Result<()> {
    if params.d() != data.d() {
        return Err(Error::input(format!(
            "model dimension d={} does not match data dimension d={}",
            params.d(),
            data.d()
        )));
    }
    Ok(())
}

/// Maximizing-cell index of every sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub assignment: Vec<usize>,
    pub cell_counts: Vec<usize>,
}

impl Partition {
    /// Sample indices assigned to each cell, in increasing order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> =
            self.cell_counts.iter().map(|&c| Vec::with_capacity(c)).collect();
        for (i, &j) in self.assignment.iter().enumerate() {
            out[j].push(i);
        }
        out
    }
}

/// Assigns every sample to the smallest index attaining `max_j <[x_i; 1], beta_j>`.
pub fn assign_cells(params: &ModelParams, data: &Dataset) -> Result<Partition> {
    check_dims(params, data)?;
    let mut assignment = Vec::with_capacity(data.n());
    let mut cell_counts = vec![0usize; params.k()];
    for i in 0..data.n() {
        let (j, _) = params.argmax(data.x(i));
        assignment.push(j);
        cell_counts[j] += 1;
    }
    Ok(Partition { assignment, cell_counts })
}

/// `r_i = max_j <[x_i; 1], beta_j> - y_i`.
pub fn max_residuals(params: &ModelParams, data: &Dataset) -> Result<Vec<f64>> {
    check_dims(params, data)?;
    Ok((0..data.n())
        .map(|i| params.argmax(data.x(i)).1 - data.y(i))
        .collect())
}
