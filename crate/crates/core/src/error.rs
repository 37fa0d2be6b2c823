//! Error types shared across the library.

use thiserror::Error;

/// Library error. Two broad categories matter to callers: validation errors
/// (bad inputs, rejected before any computation) and numeric errors (a
/// computation produced a non-finite value).
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Malformed input: bad parameter, index out of range, grid mismatch.
    #[error("validation: {0}")]
    Validation(String),

    /// The explicit scheme would lose monotonicity at this resolution.
    #[error(
        "validation: CFL condition dt <= dx^2/sigma_high^2 violated \
         (n_steps = {n_steps}, minimal admissible n_steps = {min_steps})"
    )]
    CflViolation { n_steps: usize, min_steps: usize },

    /// An operation is not defined for this payoff kind (e.g. a derivative
    /// of a kinked payoff).
    #[error("validation: payoff kind `{kind}` not supported by {operation}")]
    UnsupportedPayoff { kind: String, operation: String },

    /// A computation produced NaN or infinity.
    #[error("numeric: non-finite value at {0}")]
    NonFinite(String),
}

impl Error {
    /// True for errors in the numeric category (overflow/NaN), false for
    /// validation errors. CLI maps this to exit codes 3 and 2 respectively.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
