use std::path::{Path, PathBuf};

use ced_core::dataset::DatasetError;
use ced_llm::LlmError;
use thiserror::Error;

/// Failures sorted by exit status: invalid input exits 1, I/O and
/// transport failures exit 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Transport(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Io { .. } | CliError::Transport(_) => 2,
        }
    }

    pub fn invalid(msg: impl ToString) -> Self {
        CliError::Invalid(msg.to_string())
    }

    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io { path, source } => CliError::Io { path, source },
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::Io { path, source } => CliError::Io { path, source },
            e @ LlmError::AllFailed { .. } => CliError::Transport(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}
