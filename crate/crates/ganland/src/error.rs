use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Errors surfaced by the CLI, each mapped to a fixed exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Invalid(#[from] ganland_core::Error),
    #[error("{0}")]
    Diverged(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed file {}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, message: impl Into<String>) -> Self {
        CliError::Format { path: path.to_path_buf(), message: message.into() }
    }

    /// 1 for configuration or argument problems, 2 for numeric divergence,
    /// 3 for I/O and file-format problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Invalid(_) => 1,
            CliError::Diverged(_) => 2,
            CliError::Io { .. } | CliError::Format { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
