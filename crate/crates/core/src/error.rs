use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval: {0}")]
    Interval(String),

    #[error("taxonomy error: {0}")]
    Taxonomy(String),

    #[error("manifest error in clip `{clip_id}`: {message}")]
    Clip { clip_id: String, message: String },

    #[error("manifest schema error: {0}")]
    Schema(String),

    #[error("{path}:{line}: {message}")]
    Line {
        path: String,
        line: usize,
        message: String,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unknown clip `{0}`")]
    UnknownClip(String),

    #[error("frame alignment error: {0}")]
    Alignment(String),

    #[error("frame error: {0}")]
    Frame(String),

    #[error("inconsistent review decision: {0}")]
    Decision(String),

    #[error("decision log corrupt at line {line}: {message}")]
    LogCorrupt { line: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn clip(clip_id: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Clip {
            clip_id: clip_id.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by the data handed in rather than by the
    /// environment or by a bug.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Contract(_))
    }
}
