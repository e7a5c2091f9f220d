use std::fmt::Display;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Pipeline failure, mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("numeric failure: {0}")]
    Numeric(#[from] psp_core::Error),
}

impl CliError {
    pub fn io(path: &Path, e: impl Display) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    /// Input errors from the core library become I/O failures tied to the
    /// file being read; everything else is numeric.
    pub fn reading(path: &Path, e: psp_core::Error) -> Self {
        use psp_core::Error as E;
        match e {
            E::Io(_) | E::Csv(_) | E::Json(_) | E::Parse { .. } | E::Validation { .. } => CliError::io(path, e),
            other => CliError::Numeric(other),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Numeric(_) => 4,
        }
    }
}
