use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad configuration or usage; exit code 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// Failure while running; exit code 1.
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn config(field: &str, msg: impl Into<String>) -> Self {
        HarnessError::Config(format!("{field}: {}", msg.into()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Runtime(_) => 1,
        }
    }
}

impl From<ddmodem::Error> for HarnessError {
    fn from(e: ddmodem::Error) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

pub type HarnessResult<T> = std::result::Result<T, HarnessError>;
