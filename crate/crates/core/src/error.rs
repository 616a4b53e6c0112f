use thiserror::Error;

/// Errors raised by the numerical modules and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular point: {0}")]
    SingularPoint(String),

    #[error("insufficient resolution: {0}")]
    InsufficientResolution(String),

    #[error("series never decays into the fit window (min ratio {min_ratio:.3e})")]
    InsufficientDecay { min_ratio: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid solver state: {0}")]
    InvalidState(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Process exit code used by the CLI: 2 for configuration problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::InsufficientResolution(_) => 2,
            Error::Io(_) | Error::Json(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
