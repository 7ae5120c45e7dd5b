use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An input value is outside the mathematical domain of an operation
    /// (negative time, non-finite energy, utilization outside [0, 1], ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A structural precondition was violated (mismatched list lengths,
    /// empty report, inconsistent serving configuration, ...).
    #[error("contract error: {0}")]
    Contract(String),

    /// A model plus its KV budget does not fit in a GPU's VRAM.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// A key (percentile, workload row, GPU name, ...) was not found.
    #[error("lookup error: {0}")]
    Lookup(String),

    /// Matrix completion cannot proceed (empty row or column).
    #[error("completion error: {0}")]
    Completion(String),

    /// Configuration file is invalid; the message names the offending key path.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
