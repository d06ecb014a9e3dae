use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum JlError {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no dimension in [{lo}, {hi}] satisfies the bound (log left side at upper edge: {log_lhs_at_edge:.6})")]
    Infeasible {
        lo: u64,
        hi: u64,
        log_lhs_at_edge: f64,
    },

    #[error("point identifiers differ between datasets")]
    MismatchedIds,

    #[error("dataset is degenerate: {0}")]
    Degenerate(String),

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("instance too large for exhaustive search: m={m}, limit {limit}")]
    TooLarge { m: usize, limit: usize },

    #[error("clusters overlap: point {0} is a member of both")]
    Overlap(usize),

    #[error("coincident centroids for clusters {0} and {1}")]
    CoincidentCentroids(usize, usize),

    #[error("infeasible mixture spec: {0}")]
    InfeasibleSpec(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl JlError {
    /// Validation failures as opposed to I/O failures; the CLI maps these to
    /// different exit codes.
    pub fn is_validation(&self) -> bool {
        match self {
            JlError::Io(_) => false,
            JlError::Csv(e) => !matches!(e.kind(), csv::ErrorKind::Io(_)),
            _ => true,
        }
    }
}

pub type Result<T> = std::result::Result<T, JlError>;

pub(crate) fn domain(msg: impl Into<String>) -> JlError {
    JlError::Domain(msg.into())
}
