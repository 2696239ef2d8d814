use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("cost matrix is empty")]
    EmptyMatrix,
    #[error("cost matrix is not square: row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("negative cost at ({row}, {col})")]
    NegativeCost { row: usize, col: usize },
    #[error("brute force enumeration is limited to n <= {max}, got n = {n}")]
    TooLarge { n: usize, max: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("count {count} exceeds n = {n}")]
    CountExceedsN { count: usize, n: usize },
    #[error("negative threshold")]
    NegativeThreshold,
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}
