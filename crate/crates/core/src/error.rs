use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {path}: {message}")]
    Codec { path: PathBuf, message: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: duplicate record id `{id}`")]
    DuplicateId { path: PathBuf, line: usize, id: String },

    #[error("{path}:{line}: unknown tier `{tier}` (expected Image, HQFrame, MQFrame or LQFrame)")]
    UnknownTier {
        path: PathBuf,
        line: usize,
        tier: String,
    },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid {what}: {message}")]
    Invalid { what: &'static str, message: String },

    #[error("missing prediction for sample `{0}`")]
    MissingPrediction(String),

    #[error("model callback failed on sample `{id}`: {message}")]
    Callback { id: String, message: String },

    #[error("controller has already stopped")]
    ControllerStopped,
}

impl Error {
    pub(crate) fn invalid(what: &'static str, message: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the environment (filesystem) rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
