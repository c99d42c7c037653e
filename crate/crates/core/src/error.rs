use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("expected {expected} frames per speaker, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("label {0} is outside 0..=255")]
    LabelRange(i64),

    #[error("invalid label distribution: {0}")]
    Distribution(String),

    #[error("{0}")]
    Region(String),

    #[error("trace header: {0}")]
    TraceHeader(String),

    #[error("trace format, row {row}: {msg}")]
    TraceFormat { row: usize, msg: String },

    #[error("trace validation, row {row}: {msg}")]
    TraceValidation { row: usize, msg: String },

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("invalid alignment: {0}")]
    Alignment(String),

    #[error("invalid audio: {0}")]
    Audio(String),

    #[error("{0}")]
    Prosody(String),

    #[error("corpus {location}: {msg}")]
    Corpus { location: String, msg: String },

    #[error("{0}")]
    Word(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the error reports well-formed input that violates a
    /// numeric or structural contract, as opposed to unreadable input.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Dimension { .. }
                | Error::LabelRange(_)
                | Error::Distribution(_)
                | Error::Region(_)
                | Error::TraceValidation { .. }
                | Error::Scenario(_)
                | Error::Alignment(_)
                | Error::Prosody(_)
        )
    }
}
