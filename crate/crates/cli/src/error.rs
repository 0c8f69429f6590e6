use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or parameters; nothing has been written.
    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            _ => 3,
        }
    }
}

impl From<isodesign_core::Error> for CliError {
    fn from(e: isodesign_core::Error) -> Self {
        match e {
            isodesign_core::Error::Validation(msg) => CliError::Validation(msg),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Validation(msg.into()))
}
