//! CLI-level error with the process exit code it maps to:
//! 2 input/parse, 3 numerical degeneracy, 4 configuration.

use std::fmt;

use rmscca::Error as LibError;

#[derive(Debug)]
pub struct AppError {
    pub message: String,
    pub exit_code: i32,
}

impl AppError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { message: message.into(), exit_code: 2 }
    }

    pub fn degenerate(message: impl Into<String>) -> Self {
        Self { message: message.into(), exit_code: 3 }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self { message: message.into(), exit_code: 4 }
    }

    /// Library errors raised while data is being loaded or validated.
    pub fn from_load(err: LibError) -> Self {
        match err {
            LibError::DegenerateColumn { .. } => Self::degenerate(err.to_string()),
            _ => Self::input(err.to_string()),
        }
    }

    /// Library errors raised while fitting or resampling.
    pub fn from_fit(err: LibError) -> Self {
        match err {
            LibError::DegenerateColumn { .. }
            | LibError::DegeneratePair { .. }
            | LibError::NoViableLambda { .. } => Self::degenerate(err.to_string()),
            LibError::InvalidInput(_) => Self::config(err.to_string()),
            LibError::DimensionMismatch(_) => Self::input(err.to_string()),
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for AppError {}
