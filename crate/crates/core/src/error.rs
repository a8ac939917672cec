use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("corner entries of the defining vectors disagree")]
    CornerMismatch,
    #[error("dense realization of size {n} exceeds the cap {cap}")]
    DenseCapExceeded { n: usize, cap: usize },
    #[error("quadrature with {points} points is below the required {required}")]
    QuadratureUnderResolved { points: usize, required: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("hartley index {0} has no second generator")]
    UnsupportedHartleyIndex(u8),
    #[error("algebra {0} is not a 1-space")]
    NotAOneSpace(String),
    #[error("structure violation: {0}")]
    StructureViolation(String),
    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),
    #[error("diagonal entries are not served by the entry oracle")]
    DiagonalRequested,
    #[error("position ({i}, {j}) is not computable with the available generators")]
    UncomputablePosition { i: usize, j: usize },
    #[error("both generator ladders vanish at ({i}, {j})")]
    DegenerateDenominator { i: usize, j: usize },
    #[error("rank budget {rank} exhausted with residual estimate {residual:e}")]
    RankBudgetExhausted { rank: usize, residual: f64 },
    #[error("the oracle cannot serve this request: {0}")]
    OracleUnsupported(String),
    #[error("lambda^n is numerically equal to phi")]
    PoleAtPhi,
    #[error("denominator roots are not distinct")]
    DuplicateRoots,
    #[error("degree violation: {0}")]
    DegreeViolation(String),
    #[error("polynomial correction system has residual {residual:e}")]
    IllConditionedChi { residual: f64 },
    #[error("exponential sum fit reached {terms} terms with error {error:e}")]
    FitFailed { terms: usize, error: f64 },
    #[error("diagonal entry {index} of the preconditioner is zero")]
    SingularDiagonal { index: usize },
    #[error("capacitance matrix is singular")]
    SingularCapacitance,
    #[error("input matrix is not Hermitian")]
    NonHermitianInput,
    #[error("cannot parse algebra token '{0}'")]
    ParseAlgebra(String),
    #[error("eigenvalue iteration did not converge")]
    EigenFailure,
}

pub type Result<T> = std::result::Result<T, Error>;
