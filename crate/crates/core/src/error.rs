use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("simulator diverged at step {step}: {message}")]
    Divergence { step: u64, message: String },

    #[error("parse error at record {record}: {message}")]
    Parse { record: usize, message: String },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u16, expected: u16 },

    #[error("non-finite gradient for parameter `{param}`{}", last_checkpoint_suffix(.last_checkpoint))]
    NumericFailure {
        param: String,
        last_checkpoint: Option<PathBuf>,
    },

    #[error("checkpoint rejected: {0}")]
    Checkpoint(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn last_checkpoint_suffix(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => format!(" (last good checkpoint: {})", p.display()),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
