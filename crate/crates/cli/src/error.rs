use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, malformed files or inputs the model rejects (exit code 2).
    #[error("{0}")]
    Input(String),
    /// Numerical failures and unexpected I/O problems (exit code 1).
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        Self::Input(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => 2,
            Self::Internal(_) => 1,
        }
    }
}

impl From<tvising::Error> for CliError {
    fn from(e: tvising::Error) -> Self {
        if e.is_input_error() {
            Self::Input(e.to_string())
        } else {
            Self::Internal(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        match e.kind() {
            std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => Self::Input(e.to_string()),
            _ => Self::Internal(e.to_string()),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
