//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(&'static str),

    #[error("model families do not match: {0}")]
    FamilyMismatch(&'static str),

    #[error("dynamics produced a non-finite state at step {step}")]
    NonFiniteState { step: usize },

    #[error("planner rollout produced a non-finite value at sample {sample}")]
    NonFiniteSample { sample: usize },

    #[error("policy cover is empty")]
    EmptyCover,

    #[error("confidence region is empty")]
    EmptyConfidenceRegion,

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
