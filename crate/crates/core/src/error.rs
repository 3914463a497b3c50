use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum CiError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: String, got: String },

    #[error("insufficient sample: need at least {needed} observations, got {got}")]
    InsufficientSample { needed: usize, got: usize },

    #[error("value {value} lies outside the support [{lo}, {hi}]")]
    OutOfSupport { value: f64, lo: f64, hi: f64 },

    #[error("unsupported Z dimension {0}; only 1 or 2 are supported")]
    UnsupportedDimension(usize),

    #[error("invalid probability table: {0}")]
    InvalidTable(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("data does not match test mode: {0}")]
    ModeMismatch(String),

    #[error("infeasible construction: {0}")]
    Construction(String),

    #[error("quadrature did not reach tolerance {target:e} (estimated error {estimate:e})")]
    Tolerance { target: f64, estimate: f64 },

    #[error("empty input")]
    EmptyInput,

    #[error("malformed data at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CiError>;
