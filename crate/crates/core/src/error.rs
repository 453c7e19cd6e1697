use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the discovery engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("structural integrity violated: {0}")]
    Structure(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("enumeration of {d}-variable DAGs exceeds the cap of {cap}; use sampled mode")]
    Capacity { d: usize, cap: usize },

    #[error("parse error at {position}: {message}")]
    Parse { position: String, message: String },

    #[error("premise is unsatisfiable: no consistent DAG exists")]
    Unsatisfiable,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),

    #[error("transcript incomplete: {0}")]
    TranscriptIncomplete(String),

    #[error("degenerate hypothesis space: only {found} distinct consistent DAG(s)")]
    DegenerateHypotheses { found: usize },

    #[error("discrimination stalled: no remaining query has positive information gain")]
    Stalled,

    #[error("oracle answer contradicts every hypothesis under a noiseless likelihood")]
    Contradiction,

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
    pub(crate) fn parse(position: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            position: position.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
