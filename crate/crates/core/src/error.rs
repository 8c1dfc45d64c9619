use thiserror::Error;

/// Errors produced anywhere in the identification pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("normal matrix is singular or numerically rank-deficient")]
    SingularSystem,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("root finder did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("series of length {len} is too short for order {order}")]
    HorizonTooShort { len: usize, order: usize },

    #[error("root set is not closed under complex conjugation")]
    NotConjugateClosed,

    #[error("path needs at least two points, got {0}")]
    PathTooShort(usize),

    #[error("embedding needs at least two values, got {0}")]
    EmbeddingTooShort(usize),

    #[error("reference quantity has zero norm")]
    ZeroNormReference,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("row {row} has {found} columns, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures raised by the linear solvers or root finder.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem
                | Error::NonFinite(_)
                | Error::NotPositiveDefinite { .. }
                | Error::NoConvergence(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
