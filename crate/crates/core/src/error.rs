use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum PatrolError {
    #[error("{what} = {value} lies outside [0, 1]")]
    Domain { what: &'static str, value: f64 },

    #[error("location index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("{field}: {reason}")]
    InvalidInstance { field: String, reason: String },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("{0}")]
    Misuse(String),

    #[error("simplex enumeration needs {points} points, limit is {limit}")]
    EnumerationTooLarge { points: u128, limit: u128 },

    #[error("value iteration did not converge within {iterations} sweeps (last gap {last_gap:e})")]
    NonConvergence {
        iterations: usize,
        last_gap: f64,
        /// Sup-norm change of every sweep performed.
        gaps: Vec<f64>,
    },

    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = PatrolError> = std::result::Result<T, E>;

pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> PatrolError {
    PatrolError::InvalidInstance {
        field: field.into(),
        reason: reason.into(),
    }
}
