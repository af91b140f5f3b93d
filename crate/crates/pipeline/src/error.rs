use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] dualarm_core::Error),
    #[error(transparent)]
    Shape(#[from] dualarm_shape::Error),
    #[error("goal resolution failed: {0}")]
    Resolution(String),
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
