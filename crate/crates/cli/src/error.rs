use std::io;
use std::path::Path;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("flag {flag}: {message}")]
    Flag { flag: String, message: String },

    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error(transparent)]
    Core(#[from] fairtaste_core::Error),

    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },

    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
