//! Least-squares loss `(1/2n) sum_i (y_i - max_j <xi_i, beta_j>)^2` and its
//! subgradient. At ties the sample contributes only to the block selected by
//! [`assign_cells`](crate::model::assign_cells), which is the subgradient the
//! solvers follow.

use crate::error::{Error, Result};
use crate::linalg::axpy;
use crate::model::{check_dims, Dataset, ModelParams};

/// Gradient with respect to the stacked parameters; same block layout as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    k: usize,
    d: usize,
    values: Vec<f64>,
}

impl Gradient {
    pub(crate) fn zeros(k: usize, d: usize) -> Self {
        Gradient { k, d, values: vec![0.0; k * (d + 1)] }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn block(&self, j: usize) -> &[f64] {
        let w = self.d + 1;
        &self.values[j * w..(j + 1) * w]
    }

    /// Concatenation of all blocks.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.values)
    }

    fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }
}

fn nonempty(data: &Dataset) -> Result<()> {
    if data.n() == 0 {
        return Err(Error::input("dataset is empty"));
    }
    Ok(())
}

/// Adds `r * [x; 1]` to the block of the maximizing piece and returns `r`.
#[inline]
fn accumulate_sample(params: &ModelParams, data: &Dataset, i: usize, weight: f64, out: &mut [f64]) -> f64 {
    let x = data.x(i);
    let (j, s) = params.argmax(x);
    let r = s - data.y(i);
    let w = params.block_len();
    let block = &mut out[j * w..(j + 1) * w];
    let c = weight * r;
    axpy(c, x, &mut block[..w - 1]);
    block[w - 1] += c;
    r
}

pub fn loss(params: &ModelParams, data: &Dataset) -> Result<f64> {
    check_dims(params, data)?;
    nonempty(data)?;
    Ok(loss_unchecked(params, data))
}

pub(crate) fn loss_unchecked(params: &ModelParams, data: &Dataset) -> f64 {
    let mut acc = 0.0;
    for i in 0..data.n() {
        let r = params.argmax(data.x(i)).1 - data.y(i);
        acc += r * r;
    }
    acc / (2.0 * data.n() as f64)
}

pub fn gradient(params: &ModelParams, data: &Dataset) -> Result<Gradient> {
    check_dims(params, data)?;
    nonempty(data)?;
    let mut g = Gradient::zeros(params.k(), params.d());
    loss_and_gradient_into(params, data, &mut g.values);
    Ok(g)
}

/// Overwrites `out` with the full gradient and returns the loss at `params`, in one pass.
pub(crate) fn loss_and_gradient_into(params: &ModelParams, data: &Dataset, out: &mut [f64]) -> f64 {
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut sq = 0.0;
    for i in 0..data.n() {
        let r = accumulate_sample(params, data, i, 1.0, out);
        sq += r * r;
    }
    let inv_n = 1.0 / data.n() as f64;
    out.iter_mut().for_each(|v| *v *= inv_n);
    sq * 0.5 * inv_n
}

/// Gradient of `l_i(beta) = (1/2)(y_i - max_j <xi_i, beta_j>)^2`.
pub fn sample_gradient(params: &ModelParams, data: &Dataset, i: usize) -> Result<Gradient> {
    check_dims(params, data)?;
    if i >= data.n() {
        return Err(Error::input(format!("sample index {i} out of range for n={}", data.n())));
    }
    let mut g = Gradient::zeros(params.k(), params.d());
    accumulate_sample(params, data, i, 1.0, &mut g.values);
    Ok(g)
}

/// Average of per-sample gradients over a multiset of indices; repeats count
/// with multiplicity.
pub fn minibatch_gradient(params: &ModelParams, data: &Dataset, batch: &[usize]) -> Result<Gradient> {
    check_dims(params, data)?;
    if batch.is_empty() {
        return Err(Error::input("mini-batch is empty"));
    }
    if let Some(&bad) = batch.iter().find(|&&i| i >= data.n()) {
        return Err(Error::input(format!("sample index {bad} out of range for n={}", data.n())));
    }
    let mut g = Gradient::zeros(params.k(), params.d());
    minibatch_gradient_into(params, data, batch, &mut g.values);
    Ok(g)
}

pub(crate) fn minibatch_gradient_into(params: &ModelParams, data: &Dataset, batch: &[usize], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for &i in batch {
        accumulate_sample(params, data, i, 1.0, out);
    }
    let inv_m = 1.0 / batch.len() as f64;
    out.iter_mut().for_each(|v| *v *= inv_m);
}

impl std::ops::AddAssign<&Gradient> for Gradient {
    fn add_assign(&mut self, rhs: &Gradient) {
        axpy(1.0, &rhs.values, &mut self.values);
    }
}

/// Mean of `sample_gradient` over all samples; used by tests as the
/// linearity cross-check of [`gradient`].
pub fn mean_sample_gradient(params: &ModelParams, data: &Dataset) -> Result<Gradient> {
    nonempty(data)?;
    let mut acc = Gradient::zeros(params.k(), params.d());
    for i in 0..data.n() {
        acc += &sample_gradient(params, data, i)?;
    }
    acc.scale(1.0 / data.n() as f64);
    Ok(acc)
}
