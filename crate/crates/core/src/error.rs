use num_bigint::BigInt;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is singular")]
    SingularMatrix,

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("cannot certify to tolerance {tol:e}: {reason}")]
    PrecisionFailure { tol: f64, reason: String },

    #[error("an eigenvalue of the matrix is a root of unity")]
    RootOfUnity,

    #[error("{what} has {count} elements, cap is {cap}")]
    CapExceeded {
        what: &'static str,
        count: BigInt,
        cap: BigInt,
    },

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("strict comparison cannot be certified at current precision: {0}")]
    AmbiguousComparison(String),

    #[error("hypothesis not met: {0}")]
    HypothesisNotMet(String),

    #[error("matrix is not diagonalizable over the rationals")]
    NotDiagonalizableOverQ,

    #[error("matrix has non-integer eigenvalues")]
    NonIntegerEigenvalues,

    #[error("no admissible level found within horizon {horizon}")]
    Infeasible { horizon: u32 },

    #[error("parent node {parent} at level {level} has no admissible child")]
    EmptyLevel { level: usize, parent: usize },

    #[error("scale 2^-{exponent} requires {boxes} boxes, limit is {limit}")]
    ScaleTooFine { exponent: u32, boxes: u128, limit: u128 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn cap(what: &'static str, count: impl Into<BigInt>, cap: impl Into<BigInt>) -> Self {
        Error::CapExceeded {
            what,
            count: count.into(),
            cap: cap.into(),
        }
    }
}
