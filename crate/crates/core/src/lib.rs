//! Max-affine regression `y = max_j (<x, theta_j> + b_j) + z`.
//!
//! The crate provides the model and its least-squares objective, three
//! estimators (constant-step gradient descent, mini-batch SGD with
//! replacement sampling, and alternating minimization), synthetic teacher
//! models and covariate laws, permutation-invariant error metrics,
//! evaluators for the theoretical rates, and an experiment harness for
//! convergence traces and phase-transition grids.

pub mod datagen;
pub mod error;
pub mod experiment;
pub mod init;
pub mod io;
mod linalg;
pub mod metrics;
pub mod model;
pub mod objective;
pub mod rng;
pub mod solvers;
pub mod theory;

pub use datagen::{CovariateLaw, GroundTruthGeometry};
pub use error::{Error, Result};
pub use init::NeighborhoodSpec;
pub use metrics::ErrorReport;
pub use model::{assign_cells, max_residuals, Dataset, ModelParams, Partition};
pub use objective::Gradient;
pub use solvers::{Algorithm, SolverConfig, SolverRun, TraceRecord};
pub use theory::TheoryInputs;
