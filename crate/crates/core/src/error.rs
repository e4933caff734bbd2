use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("unparseable label {0:?}")]
    UnparseableLabel(String),

    #[error("replay exhausted for node {node} input {input_id}")]
    ReplayExhausted { node: String, input_id: String },

    #[error("remote agent error: {0}")]
    Remote(String),

    #[error("no agent profile for node {node} input {input_id}")]
    MissingProfile { node: String, input_id: String },

    #[error("invalid DAG: {0}")]
    InvalidDag(String),

    #[error("invalid synthetic dataset spec: {0}")]
    InvalidSpec(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("missing ground truth for input {0}")]
    MissingGroundTruth(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Errors that stem from bad user input rather than a failure while running.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Domain(_)
                | Error::InvalidDag(_)
                | Error::InvalidSpec(_)
                | Error::InvalidDataset(_)
                | Error::EmptyDataset
                | Error::Parse { .. }
        )
    }
}
