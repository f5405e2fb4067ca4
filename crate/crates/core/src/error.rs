use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("edge list contains no edges")]
    EmptyInput,

    #[error("matrix is rank deficient at column {column} (|r| = {magnitude:e})")]
    RankDeficient { column: usize, magnitude: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(message: impl Into<String>) -> Self {
        Error::Contract(message.into())
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }
}
