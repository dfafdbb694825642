use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize, context: String },

    #[error("count mismatch in {context}: expected {expected}, found {found}")]
    CountMismatch { expected: usize, found: usize, context: String },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("sinkhorn did not converge: marginal violation {violation:e} after {iterations} iterations")]
    NotConverged { violation: f64, iterations: usize },

    #[error("row {0} of the transport plan has zero mass")]
    ZeroRow(usize),

    #[error("series of length {length} is shorter than two windows of {window}")]
    SeriesTooShort { length: usize, window: usize },

    #[error("parse error at row {row}, column {col}: {message}")]
    Parse { row: usize, col: usize, message: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
