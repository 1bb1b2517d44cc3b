use std::path::{Path, PathBuf};

use ahcc_core::Error as CoreError;

/// Failures of a CLI command, each tied to an exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Schema(String),

    #[error("solver failed: {0}")]
    Solver(CoreError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Solver(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Io { .. } | CliError::Schema(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Diverged { .. }
            | CoreError::NotConverged { .. }
            | CoreError::LinearStall { .. }
            | CoreError::NotPositiveDefinite { .. }
            | CoreError::NonFinite { .. } => CliError::Solver(e),
            CoreError::ShapeMismatch(_) | CoreError::Dirichlet { .. } | CoreError::Representation(_) => {
                CliError::Schema(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}
