//! Crate-wide error type.

use crate::channel::CapacityResult;

/// Errors returned by the library.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("channel row {row} is not a distribution: {reason}")]
    InvalidChannelRow { row: usize, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid channel family: {0}")]
    InvalidFamily(String),

    #[error("capacity solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    CapacityNotConverged {
        iterations: u32,
        residual: f64,
        /// Best iterate reached before giving up.
        best: Box<CapacityResult>,
    },

    #[error("unknown state label `{0}`")]
    UnknownState(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty search space: {0}")]
    EmptySearchSpace(String),

    #[error("message length k={k} exceeds the desk-scale guard ({max}); pass allow_large_k to override")]
    MessageLengthGuard { k: u32, max: u32 },

    #[error("received sequence length {got} exceeds codeword length {max}")]
    LengthMismatch { got: usize, max: usize },

    #[error("json: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
