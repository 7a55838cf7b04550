use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An index or truncation level exceeds what the sample supports.
    #[error("{what} = {value} exceeds the admissible bound {bound}")]
    Range {
        what: &'static str,
        value: usize,
        bound: usize,
    },

    /// An invalid or unsupported signal/kernel/noise model.
    #[error("model error: {0}")]
    Model(String),

    /// An invalid configuration value; `field` names the offending key.
    #[error("invalid configuration `{field}`: {message}")]
    Config { field: String, message: String },

    /// A statistical precondition that the data at hand cannot satisfy.
    #[error("{0}")]
    Precondition(String),

    #[error("malformed input {path}, row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for the command-line front end: 2 for invalid input,
    /// 3 for statistical preconditions the data cannot meet, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::Range { .. }
            | Error::Model(_)
            | Error::Config { .. }
            | Error::Parse { .. }
            | Error::Json(_) => 2,
            Error::Precondition(_) => 3,
            Error::Io { .. } => 1,
        }
    }
}
