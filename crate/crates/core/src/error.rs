//! Error type shared by the whole crate.

use thiserror::Error;

/// Errors produced by construction, validation and numeric routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument: bad dimension, index out of range, malformed input.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A quantity was requested outside its mathematical domain
    /// (e.g. an undiscounted value without absorbing structure).
    #[error("domain error: {0}")]
    Domain(String),

    /// A linear solve failed or a matrix is too ill-conditioned to trust.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A structural assumption on the chain was violated
    /// (non-self-looping or rewarded absorbing states).
    #[error("assumption violated: {0}")]
    Assumption(String),

    /// The declared transient block is not actually transient.
    #[error("chain is not absorbing: {0}")]
    NonAbsorbing(String),

    /// Integer overflow past the representable range.
    #[error("out of range: {0}")]
    Range(String),

    /// A trajectory was too short for the requested estimate.
    #[error("truncation: {0}")]
    Truncation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
