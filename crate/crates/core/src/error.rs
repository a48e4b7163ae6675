use thiserror::Error;

use crate::inverse_problem::SolverReport;

/// Errors produced while building, fitting or evaluating IFS estimators.
#[derive(Debug, Error)]
pub enum IfsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("map is not invertible (slope is zero)")]
    NonInvertible,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("solver did not converge: simplex residual {:.3e} after {} iterations", .0.penalty_residual, .0.iterations)]
    NonConvergence(Box<SolverReport>),

    #[error("no observations left after censoring")]
    NoData,

    #[error("{failed} of {total} replications failed (limit 5%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error("model schema error: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, IfsError>;

pub(crate) fn invalid(msg: impl Into<String>) -> IfsError {
    IfsError::InvalidArgument(msg.into())
}
