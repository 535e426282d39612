use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the analysis pipeline.
#[derive(Debug, Error)]
pub enum FamfError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("non-numeric cell {value:?} at row {row}, column {column:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("zero variance: {0}")]
    ZeroVariance(String),
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("model not identified: {0}")]
    Identification(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("metadata uninformative: {0}")]
    MetadataUninformative(String),
    #[error("degenerate weights; metadata uninformative — consider CLF comparator ({0})")]
    DegenerateWeights(String),
    #[error("no cross-scale pairs: {0}")]
    NoCrossScalePairs(String),
    #[error("optimization failed: {0}")]
    NonConvergence(String),
}

pub type Result<T> = std::result::Result<T, FamfError>;

impl FamfError {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            FamfError::NonConvergence(_) => 2,
            FamfError::DegenerateWeights(_) | FamfError::MetadataUninformative(_) => 3,
            _ => 1,
        }
    }
}
