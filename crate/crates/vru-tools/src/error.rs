//! Error type shared by the command-line tools, with a stable mapping to
//! process exit codes: 1 for I/O, 2 for validation/parse failures, 3 for
//! configuration problems.

use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Config(String),
}

impl ToolError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        ToolError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        ToolError::Validation(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        ToolError::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            ToolError::Io { .. } => 1,
            ToolError::Validation(_) => 2,
            ToolError::Config(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, ToolError>;

/// Reads a file to string with the path attached to any failure.
pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| ToolError::io(path, e))
}

/// Writes a file with the path attached to any failure, creating parent
/// directories as needed.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| ToolError::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| ToolError::io(path, e))
}
