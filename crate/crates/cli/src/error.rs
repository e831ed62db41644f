use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failures surfaced by the runner, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("invalid file {}", path.display())]
    InvalidFile {
        path: PathBuf,
        #[source]
        source: relgeo::Error,
    },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] relgeo::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingInput(_) => 2,
            CliError::InvalidFile { .. } => 3,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Reads an input file, separating "not there" (exit 2) from "there but
/// inconsistent" (exit 3).
pub fn load<T>(path: &Path, read: impl FnOnce(&Path) -> relgeo::Result<T>) -> CliResult<T> {
    if !path.is_file() {
        return Err(CliError::MissingInput(path.to_path_buf()));
    }
    read(path).map_err(|e| match e {
        relgeo::Error::Io(io) => CliError::Io(io),
        source => CliError::InvalidFile {
            path: path.to_path_buf(),
            source,
        },
    })
}
