use thiserror::Error;

use crate::model::SupportSet;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    /// The solver ran out of sweeps before reaching the requested gap.
    #[error("iteration budget of {iterations} sweeps exhausted with duality gap {gap:e}")]
    Budget {
        iterations: usize,
        gap: f64,
        x: Vec<f64>,
    },

    /// Some entry sits inside the numerical-error band around the threshold.
    #[error(
        "support is ambiguous: |x_{index}| = {value:e} lies within {margin:e} of tau = {tau:e}"
    )]
    UncertainSupport {
        index: usize,
        value: f64,
        tau: f64,
        margin: f64,
    },

    /// The largest entry of |a| is attained more than once.
    #[error("largest |a_i| is attained at {first} and {second}")]
    Tie { first: usize, second: usize },

    #[error("Sigma_SS is singular or not positive definite")]
    SingularSigmaSS,

    #[error("sigma_hat = {0:e} is not positive; assumption (aii) fails")]
    NonpositiveSigmaHat(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no dyadic witness found: {0}")]
    SearchFailed(String),

    #[error("read at precision {requested} exceeds the cap {cap}")]
    PrecisionExceeded { requested: u32, cap: u32 },

    #[error("empty sample")]
    EmptySample,

    #[error("support {0} is not valid for dimension {1}")]
    BadSupport(SupportSet, usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
