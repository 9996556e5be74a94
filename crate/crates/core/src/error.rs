use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input data violates a type invariant (non-finite value, empty sample, wrong shape).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numeric parameter (epsilon, delta, scale, reps, alpha, ...) is out of range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The statistic is undefined for this input (zero variance, empty group, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    /// A t-test observation outside [-1, 1].
    #[error("line {line}: value {value} is outside [-1, 1]; rescale the data before running the t-test")]
    OutOfRange { line: u64, value: f64 },

    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
