use thiserror::Error;

/// Errors produced by lattice and ring operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("inertia degree {0} outside supported range 1..=4")]
    UnsupportedDegree(usize),
    #[error("working precision {actual} too small, need at least {required}")]
    PrecisionTooSmall { required: u32, actual: u32 },
    #[error("p^k exceeds the 2^62 coefficient capacity")]
    PrecisionCapacity,
    #[error("division by a non-unit")]
    DivisionByNonUnit,
    #[error("element is not a unit")]
    NotAUnit,
    #[error("element is not a square")]
    NotSquare,
    #[error("matrix shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("degenerate lattice: determinant vanishes at working precision")]
    DegenerateLattice,
    #[error("Hensel premise violated: {0}")]
    PremiseViolation(String),
    #[error("search budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("construction hypotheses not satisfied: {0}")]
    HypothesisFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
