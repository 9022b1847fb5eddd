use thiserror::Error;

/// Errors raised by channel construction, conversion and analysis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |A - A^dagger| = {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("bad dimension {0}: need d >= 2")]
    BadDimension(usize),

    #[error("Kraus operators are not complete (max |sum E^dagger E - I| = {defect:e})")]
    IncompleteKraus { defect: f64 },

    #[error("malformed transfer matrix: {0}")]
    MalformedTransfer(String),

    #[error("map is not invertible (condition number {condition:e})")]
    SingularIntermediate { condition: f64 },

    #[error("finite-difference step too coarse: h and h/2 estimates differ by {relative:e}")]
    StepTooCoarse { relative: f64 },

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("damping parameter saturated: lambda = {lambda}")]
    DampingSaturated { lambda: f64 },

    #[error("curve value out of range: {0}")]
    CurveOutOfRange(String),

    #[error("probabilities do not form a simplex: {0}")]
    BadSimplex(String),

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("bad rate: {0}")]
    BadRate(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
