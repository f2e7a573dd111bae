use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed JSON or a record missing a required field.
    #[error("parse error in {record}: {message}")]
    Parse { record: String, message: String },

    /// A record references an id that does not resolve.
    #[error("{record} references unknown {kind} id {id}")]
    Referential {
        record: String,
        kind: &'static str,
        id: u64,
    },

    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: u64 },

    #[error("duplicate category name {0:?}")]
    DuplicateName(String),

    #[error("invalid {what}: {message}")]
    Invalid { what: String, message: String },

    /// A probability vector does not sum to one.
    #[error("{record}: score vector sums to {sum}, expected 1 within {tolerance}")]
    Normalization {
        record: String,
        sum: f64,
        tolerance: f64,
    },

    #[error("dimension mismatch: {what} has {found} classes, expected {expected}")]
    Dimension {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("class index {index} out of range for {n} classes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("mixed detection formats: {0}")]
    MixedFormats(String),

    #[error("image id collision: {0}")]
    IdCollision(String),

    #[error("label batch {0} has already been merged into this dataset")]
    DuplicateMerge(String),

    #[error("ground truth contains no annotations")]
    EmptyGroundTruth,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(record: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            record: record.into(),
            message: message.to_string(),
        }
    }

    pub fn invalid(what: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            what: what.into(),
            message: message.into(),
        }
    }

    /// True for failures of the environment rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
