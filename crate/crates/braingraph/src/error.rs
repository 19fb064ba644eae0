use thiserror::Error;

/// Crate-wide error type.
///
/// Variants mirror the failure surfaces of the pipeline: shape/contract
/// violations in the numeric substrate, malformed data at ingestion,
/// invalid configuration, and runtime training failures.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shape or axis mismatch.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// An API precondition was violated (non-scalar loss, wrong graph kind, ...).
    #[error("contract error: {0}")]
    Contract(String),

    /// Invalid user-supplied configuration (bad fractions, class count < k, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A time-series file failed to load for a named subject.
    #[error("ingestion error: {0}")]
    Ingest(String),

    /// Subjects disagree on the number of ROIs or a file has the wrong width.
    #[error("schema error: {0}")]
    Schema(String),

    /// Non-finite values in loaded data.
    #[error("data error: {0}")]
    Data(String),

    /// Non-finite loss/gradient or other failure inside a training run.
    #[error("training error: {0}")]
    Training(String),

    /// Every candidate in a hyperparameter search aborted.
    #[error("search error: {0}")]
    Search(String),

    /// Metric computation on a degenerate confusion table.
    #[error("metric error: {0}")]
    Metric(String),

    /// Command-line / plotting usage error.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
