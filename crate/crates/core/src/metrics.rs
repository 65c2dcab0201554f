//! Estimation-error metrics that ignore the labeling of affine pieces.

use serde::Serialize;

use crate::datagen::CovariateLaw;
use crate::error::{Error, Result};
use crate::linalg::sq_dist;
use crate::model::ModelParams;
use crate::rng::child_rng;

/// Largest `k` for which the best matching is found by enumerating all `k!` permutations.
pub const EXHAUSTIVE_MAX_K: usize = 8;

/// Default success cutoff on `log10` relative error.
pub const DEFAULT_SUCCESS_LOG10: f64 = -6.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    /// `min_pi sum_j |est_{pi(j)} - truth_j|^2 / sum_j |truth_j|^2`
    pub rel_error: f64,
    pub log10_rel_error: f64,
    /// `best_permutation[j]` is the estimate block matched to truth block `j`.
    pub best_permutation: Vec<usize>,
    pub prediction_error: Option<f64>,
}

fn check_shapes(estimate: &ModelParams, truth: &ModelParams) -> Result<()> {
    if estimate.k() != truth.k() || estimate.d() != truth.d() {
        return Err(Error::input(format!(
            "estimate has k={}, d={} but truth has k={}, d={}",
            estimate.k(),
            estimate.d(),
            truth.k(),
            truth.d()
        )));
    }
    Ok(())
}

/// `cost[j][l] = |truth_j - est_l|^2`
fn block_costs(estimate: &ModelParams, truth: &ModelParams) -> Vec<Vec<f64>> {
    (0..truth.k())
        .map(|j| (0..estimate.k()).map(|l| sq_dist(truth.block(j), estimate.block(l))).collect())
        .collect()
}

/// Cost of a matching, always summed in truth-block order.
fn matching_cost(cost: &[Vec<f64>], perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(j, &l)| cost[j][l]).sum()
}

/// Minimum-cost perfect matching over all `k!` permutations (Heap's algorithm).
pub fn exhaustive_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let k = cost.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = perm.clone();
    let mut best_cost = matching_cost(cost, &perm);
    let mut c = vec![0usize; k];
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            let v = matching_cost(cost, &perm);
            if v < best_cost {
                best_cost = v;
                best.copy_from_slice(&perm);
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

/// Minimum-cost perfect matching by the Hungarian method (`O(k^3)`).
///
/// Returns `assign` with row `j` matched to column `assign[j]`.
pub fn optimal_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based potentials formulation; column 0 is a sentinel
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    assign
}

/// Permutation-minimized relative squared error.
pub fn relative_error(estimate: &ModelParams, truth: &ModelParams) -> Result<ErrorReport> {
    check_shapes(estimate, truth)?;
    let denom: f64 = truth.as_slice().iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    let cost = block_costs(estimate, truth);
    let perm = if truth.k() <= EXHAUSTIVE_MAX_K {
        exhaustive_assignment(&cost)
    } else {
        optimal_assignment(&cost)
    };
    let rel_error = matching_cost(&cost, &perm) / denom;
    Ok(ErrorReport {
        rel_error,
        log10_rel_error: rel_error.log10(),
        best_permutation: perm,
        prediction_error: None,
    })
}

/// Relative error using a caller-chosen matching routine; lets tests pit the
/// Hungarian solver against enumeration on identical cost matrices.
pub fn relative_error_with(
    estimate: &ModelParams,
    truth: &ModelParams,
    matcher: fn(&[Vec<f64>]) -> Vec<usize>,
) -> Result<f64> {
    check_shapes(estimate, truth)?;
    let denom: f64 = truth.as_slice().iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    let cost = block_costs(estimate, truth);
    Ok(matching_cost(&cost, &matcher(&cost)) / denom)
}

/// Monte-Carlo estimate of `E (max_j <xi, est_j> - max_j <xi, truth_j>)^2`.
pub fn prediction_error(
    estimate: &ModelParams,
    truth: &ModelParams,
    law: CovariateLaw,
    mc_samples: usize,
    seed: u64,
) -> Result<f64> {
    check_shapes(estimate, truth)?;
    if mc_samples < 1000 {
        return Err(Error::input(format!("need at least 1000 Monte-Carlo samples, got {mc_samples}")));
    }
    let mut rng = child_rng(seed, &[0x7072_6564]);
    let mut x = vec![0.0; truth.d()];
    let mut acc = 0.0;
    for _ in 0..mc_samples {
        law.sample_into(&mut rng, &mut x);
        let diff = estimate.argmax(&x).1 - truth.argmax(&x).1;
        acc += diff * diff;
    }
    Ok(acc / mc_samples as f64)
}

/// Success iff `log10_rel_error <= threshold_log10`.
pub fn classify_success(report: &ErrorReport, threshold_log10: f64) -> bool {
    report.log10_rel_error <= threshold_log10
}
