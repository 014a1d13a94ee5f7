use std::path::PathBuf;

use haltonmask_core::Error as CoreError;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    ResourceLimit(String),
    #[error("{0}")]
    Internal(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for bad input, 3 for intractable requests, 4 for everything that
    /// should not happen.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::ResourceLimit(_) => 3,
            CliError::Internal(_) | CliError::Io { .. } => 4,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidArgument(_) => CliError::Config(e.to_string()),
            CoreError::ResourceLimit { .. } => CliError::ResourceLimit(format!(
                "{e}; exact analysis is intractable here, try a smaller grid or vocabulary"
            )),
            CoreError::ContractViolation { .. } | CoreError::Internal(_) => {
                CliError::Internal(e.to_string())
            }
        }
    }
}
