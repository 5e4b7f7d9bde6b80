use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix has zero Frobenius norm")]
    ZeroMatrix,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("data length {len} does not match {rows}x{cols}")]
    DataLength { len: usize, rows: usize, cols: usize },
    #[error("requested rank {rank} exceeds the limit {limit}")]
    RankTooLarge { rank: usize, limit: usize },
    #[error("vector dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("kernel bandwidth must be positive and finite, got {0}")]
    InvalidGamma(f64),
    #[error("row data has length {x_len} but column data has length {z_len}; a compatibility transform is required")]
    CompatibilityMissing { x_len: usize, z_len: usize },
    #[error("sample size {requested} exceeds the available {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("approximation column {0} is zero")]
    ZeroColumn(usize),
    #[error("tolerance {epsilon} not reached: best eta {eta} at cap {cap}")]
    ToleranceUnreachable { epsilon: f64, eta: f64, cap: usize },
    #[error("linear system is singular or contains non-finite values")]
    SingularSystem,
    #[error("at least two classes are required, found {0}")]
    SingleClass(usize),
    #[error("out-degree {degree} of node {node} is not below the node count {nodes}")]
    DegreeTooLarge { node: usize, degree: usize, nodes: usize },
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: column '{column}' is not numeric (line {line})")]
    NonNumericFeature {
        path: PathBuf,
        column: String,
        line: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the failure is caused by user input (configuration, files,
    /// parameters) rather than by the numerics.
    pub fn is_user_error(&self) -> bool {
        !matches!(
            self,
            Error::NonFinite { .. }
                | Error::ZeroMatrix
                | Error::SingularSystem
                | Error::ZeroColumn(_)
                | Error::ToleranceUnreachable { .. }
        )
    }
}
