use thiserror::Error;

/// Errors raised anywhere in the workbench.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GbsError {
    /// A circuit or squeezer bank violates its structural invariants.
    #[error("configuration error: {0}")]
    Config(String),

    /// A matrix failed a numerical validity check (e.g. unitarity).
    #[error("validation error: {0}")]
    Validation(String),

    /// A function argument is outside its accepted domain.
    #[error("argument error: {0}")]
    Argument(String),

    /// The requested computation exceeds a configured size guard.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// A covariance block is not positive definite.
    #[error("physicality error: {0}")]
    Physicality(String),

    /// An alternating sum produced a result outside [0, 1] beyond tolerance.
    #[error("numerical instability: {0}")]
    NumericalInstability(String),

    /// Input is degenerate for the requested statistic (zero variance, zero norm).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Malformed file content.
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for GbsError {
    fn from(e: std::io::Error) -> Self {
        GbsError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GbsError>;
