//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by density evaluations, filter steps and fusion.
#[derive(Debug, Error)]
pub enum Error {
    /// A covariance or Gram matrix could not be factorized.
    #[error("singular matrix in {context} (condition number ~{condition:.3e})")]
    SingularMatrix { context: &'static str, condition: f64 },

    /// Vector/matrix dimensions do not agree.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A measurement coincides with the predicted target center, so the
    /// bearing used by the extent model is undefined.
    #[error("measurement within guard radius of predicted center; bearing undefined")]
    CenterCoincident,

    /// No valid data-association hypothesis could be formed.
    #[error("no feasible data-association hypothesis: {0}")]
    NoFeasibleHypothesis(&'static str),

    /// The assignment problem has no full assignment of finite cost.
    #[error("assignment problem is infeasible")]
    InfeasibleAssignment,

    /// Invalid argument outside type invariants.
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
