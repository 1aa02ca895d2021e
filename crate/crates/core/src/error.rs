use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("lookup error: {0}")]
    Lookup(String),
    #[error("legality error: {0}")]
    Legality(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("structural error: {0}")]
    Structural(String),
    #[error("state error: {0}")]
    State(String),
    #[error("replay error at sequence {seq}: {reason}")]
    Replay { seq: u32, reason: String },
    #[error("calibration error: {0}")]
    Calibration(String),
    #[error("usage error: {0}")]
    Usage(String),
}

impl Error {
    pub fn parse(message: impl Into<String>) -> Self {
        Error::Parse {
            line: 0,
            column: 0,
            message: message.into(),
        }
    }

    pub(crate) fn from_json(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }

    pub(crate) fn from_csv(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::Parse {
            line,
            column: 0,
            message: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
