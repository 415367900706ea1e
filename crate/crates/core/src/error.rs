//! Error types shared across the library.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum SigError {
    /// File could not be read or written.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// JSON was syntactically invalid or did not fit the expected shape.
    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },

    /// A graph violated a structural invariant; names the offending entity.
    #[error("invalid graph {graph}: {detail}")]
    InvalidGraph { graph: String, detail: String },

    /// Caller supplied unusable input (empty sample list, bad flag value, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The hard constraint set is unsatisfiable. Hard constraints are
    /// satisfiable by construction for valid inputs, so this signals a bug.
    #[error("hard constraints unsatisfiable: {0}")]
    HardUnsat(String),

    /// Integer overflow while quantizing or flattening weights.
    #[error("weight overflow: {0}")]
    Overflow(String),

    /// The signature scored zero, so the similarity ratio is undefined.
    #[error("signature {0} is empty; similarity is undefined")]
    ZeroSignature(String),

    /// Instance exceeds the exhaustive reference bound.
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),

    /// An internal consistency check failed; always a bug, never user error.
    #[error("internal error: {0}")]
    Internal(String),
}

impl SigError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        SigError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn parse(path: &std::path::Path, detail: impl Into<String>) -> Self {
        SigError::Parse {
            path: path.display().to_string(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SigError>;
