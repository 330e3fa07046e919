use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("{what} index {index} out of range for length {len}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("unknown question id `{0}`")]
    UnknownQid(String),

    #[error("question ids missing from {side}: {qids:?}")]
    MissingQids { side: &'static str, qids: Vec<String> },

    #[error("checkpoint config digest does not match the requested head")]
    DigestMismatch,

    #[error("{0}")]
    Invalid(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable short name used by the CLI's machine-readable error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::InvalidConfig { .. } => "invalid_config",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::NonFinite { .. } => "non_finite",
            Error::Parse { .. } => "parse",
            Error::Format(_) => "format",
            Error::UnknownQid(_) => "unknown_qid",
            Error::MissingQids { .. } => "missing_qids",
            Error::DigestMismatch => "digest_mismatch",
            Error::Invalid(_) => "invalid",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
