use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("structural error: {0}")]
    Structure(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("supercritical parameters: branching ratio {ratio:.4} for topic {topic} is >= 1")]
    Supercritical { topic: usize, ratio: f64 },

    #[error("sampler collapsed: all log-weights are -inf while sampling {variable}")]
    Collapse { variable: String },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
