use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("update error: {0}")]
    Update(String),
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
