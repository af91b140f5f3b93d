use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid point cloud: {0}")]
    Cloud(String),
    #[error("registration failed: {0}")]
    Registration(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("pose estimation failed: {0}")]
    Pose(String),
    #[error("failed to parse {what}: {message}")]
    Parse { what: &'static str, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(what: &'static str, message: impl ToString) -> Self {
        Error::Parse {
            what,
            message: message.to_string(),
        }
    }
}
