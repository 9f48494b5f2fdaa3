use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong between reading a WAV file and writing a
/// metric report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{path}: expected mono audio, found {channels} channels")]
    MultiChannel { path: String, channels: u16 },

    #[error("{path}: unsupported encoding ({detail}); expected 16-bit signed PCM")]
    UnsupportedEncoding { path: String, detail: String },

    #[error("no recordings found in {}", .0.display())]
    EmptyDataset(PathBuf),

    #[error("annotation line {line}: {reason}")]
    Annotation { line: usize, reason: String },

    #[error("invalid recording {id}: {reason}")]
    InvalidRecording { id: String, reason: String },

    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged {
        epoch: usize,
        loss: f64,
        last_good: Box<crate::model::ModelParams>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(arg: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            arg,
            reason: reason.into(),
        }
    }

    /// Coarse classification used by the command-line front end to pick an
    /// exit code.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument { .. } | Error::Config(_) => ErrorKind::Usage,
            Error::NonFinite(_) | Error::Diverged { .. } => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}
