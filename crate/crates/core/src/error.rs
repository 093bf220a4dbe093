use std::fmt;

use crate::market::Side;

/// Errors raised by the library. Every variant is a domain error; the CLI maps
/// all of them to exit code 1.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{side} index {index} out of range (count {count})")]
    IndexOutOfRange { side: Side, index: usize, count: usize },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid matching: {0}")]
    InvalidMatching(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("model `{model}` does not support {what}")]
    Unsupported { model: String, what: String },

    #[error("oracle guard exceeded: min(M, W) = {size} > guard {guard}")]
    GuardExceeded { size: usize, guard: usize },

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("unsupported format version {0}")]
    FormatVersion(u64),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl fmt::Display) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
