//! Benchmark fixtures for the max-affine solvers.

use maxaffine::experiment::{setup_trial, TrialSettings, TrialSetup};

/// Noiseless Gaussian instance with an orthonormal truth and a nearby start.
pub fn fixture(k: usize, d: usize, n: usize) -> TrialSetup {
    setup_trial(&TrialSettings::default(), 0xbe7c, n, d, k, 0).expect("valid fixture shape")
}
