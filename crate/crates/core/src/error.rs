//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BuresError {
    /// An input carried NaN or infinite entries.
    #[error("non-finite input in {context}")]
    NonFinite { context: &'static str },

    /// Per-frame Gaussian counts changed inside a sequence that requires
    /// fixed-index correspondence.
    #[error("correspondence error at frame {frame}: expected {expected} Gaussians, found {found}")]
    Correspondence {
        frame: usize,
        expected: usize,
        found: usize,
    },

    /// A metric was requested over an empty set of valid samples.
    #[error("metric undefined: {context}")]
    UndefinedMetric { context: &'static str },

    /// A configuration value violated its documented invariant.
    #[error("invalid config: {0}")]
    Config(String),

    /// Malformed serialized data (scene files, Gaussian atoms).
    #[error("malformed input in field `{field}`: {message}")]
    Malformed { field: String, message: String },
}

pub type Result<T> = std::result::Result<T, BuresError>;
