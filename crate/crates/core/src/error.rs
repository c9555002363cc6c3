use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),

    #[error("{path}:{line}: {message}")]
    Row {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("corpus is empty after filtering")]
    EmptyCorpus,

    #[error("user `{0}` has fewer than 3 interactions and cannot be split")]
    TooFewInteractions(String),

    #[error("degenerate partition: {0}")]
    DegeneratePartition(String),

    #[error("group `{0}` has no evaluated users")]
    EmptyGroup(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Divergence { epoch: usize },

    #[error("non-finite value in {node}")]
    NonFinite { node: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("candidate edge set is empty")]
    EmptyCandidates,

    #[error("policy {0} unavailable: {1}")]
    PolicyUnavailable(String, String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 config, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parameter(_) | Error::Contract(_) => 1,
            Error::Divergence { .. }
            | Error::NonFinite { .. }
            | Error::Numeric(_)
            | Error::Degenerate(_) => 3,
            _ => 2,
        }
    }
}
