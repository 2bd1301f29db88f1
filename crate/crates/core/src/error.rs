use thiserror::Error;

use crate::fixedpoint::IterationLog;

/// Errors raised by the solver pipeline.
#[derive(Debug, Error)]
pub enum BiotError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("operator invariant violated: {0}")]
    Invariant(String),

    #[error("parse error at position {position}: {message}")]
    Parse { message: String, position: usize },

    #[error("Picard iteration stopped after {} sweeps without convergence (last residual {:.3e})",
        .history.len(), .history.last().map(|h| h.residual).unwrap_or(f64::NAN))]
    NotConverged { history: Vec<IterationLog> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BiotError>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(BiotError::Config(msg.into()))
}
