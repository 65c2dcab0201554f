use thiserror::Error;

use crate::model::ModelParams;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, indices, or configuration values that violate a precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// A solver produced a non-finite or runaway loss.
    #[error("solver diverged at iteration {iteration} (loss = {loss})")]
    Diverged {
        iteration: usize,
        loss: f64,
        last_finite: Box<ModelParams>,
    },

    /// A closed-form expression was evaluated outside the region where it is defined.
    #[error("formula domain error: {0}")]
    FormulaDomain(String),

    #[error("initialization failed: {0}")]
    Init(String),

    #[error("relative error undefined: ground truth has zero norm")]
    UndefinedRatio,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Diverged { .. } => 3,
            Error::FormulaDomain(_) => 4,
            _ => 2,
        }
    }
}
