use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition was violated by the caller (bad widths, non-finite state, stepping a
    /// finished episode, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value is missing, malformed or out of range.
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// Training produced a non-finite quantity and was stopped.
    #[error("numeric abort at episode {episode}, step {step}: {detail}")]
    NumericAbort {
        episode: usize,
        step: usize,
        detail: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
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
