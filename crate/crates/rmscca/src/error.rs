//! Error types shared across the crate.

use thiserror::Error;

use crate::covariance::EstimatorMode;

/// Errors produced by the fitting, simulation, and evaluation routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Input violated a precondition (shape, emptiness, non-finite values, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A data column is constant under the requested estimator, so its
    /// variance cannot be inverted.
    #[error("column '{name}' has zero variance under {mode} estimation")]
    DegenerateColumn { name: String, mode: EstimatorMode },

    /// Soft thresholding removed every coefficient of a singular vector.
    #[error("soft thresholding at (lambda_u={lambda_u}, lambda_v={lambda_v}) zeroed an entire singular vector")]
    DegeneratePair { lambda_u: f64, lambda_v: f64 },

    /// Every (lambda_u, lambda_v) grid cell degenerated for one canonical pair.
    #[error("no viable (lambda_u, lambda_v) cell for canonical pair {pair_index}")]
    NoViableLambda { pair_index: usize },

    /// Operands have incompatible shapes.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
