use std::fmt;

use thiserror::Error;

/// Which parameter-space constraint a rejected θ violated.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// ‖θ‖₂ ≤ B·√d for the Gaussian location family.
    NormBall { norm: f64, radius: f64 },
    /// θⱼ ∈ [0, 1] for the Bernoulli families.
    UnitInterval { index: usize, value: f64 },
    /// Σθⱼ ≤ m for the sparse Bernoulli family.
    SparsitySum { sum: f64, m: usize },
    /// A component was NaN or infinite.
    NonFinite { index: usize },
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::NormBall { norm, radius } => {
                write!(f, "norm ball (|theta| = {norm} > B*sqrt(d) = {radius})")
            }
            Constraint::UnitInterval { index, value } => {
                write!(f, "unit interval (theta[{index}] = {value})")
            }
            Constraint::SparsitySum { sum, m } => {
                write!(f, "sparsity (sum theta = {sum} > m = {m})")
            }
            Constraint::NonFinite { index } => write!(f, "finiteness (theta[{index}])"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("theta violates the {0} constraint")]
    ConstraintViolation(Constraint),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),

    #[error("monte carlo needs at least 2 trials, got {0}")]
    TooFewTrials(usize),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
