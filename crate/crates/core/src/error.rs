use thiserror::Error;

/// Errors surfaced by the engine. The variants map one-to-one onto the CLI exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input, mismatched dimensions, invalid configuration.
    #[error("validation error: {0}")]
    Validation(String),
    /// An exhaustive computation would exceed its configured limit.
    #[error("tractability limit exceeded: {0}")]
    Tractability(String),
    /// The remote model endpoint could not be reached or kept failing.
    #[error("external service failure: {0}")]
    ExternalService(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn tractability(msg: impl Into<String>) -> Self {
        Error::Tractability(msg.into())
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Json(_) | Error::Io(_) => 1,
            Error::Tractability(_) => 2,
            Error::ExternalService(_) => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
