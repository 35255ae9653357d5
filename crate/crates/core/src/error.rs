use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("non-unitary gate matrix (max |U^dag U - I| = {deviation:.3e})")]
    NonUnitary { deviation: f64 },

    #[error("gate index {index} out of range for {qubits} qubits")]
    GateOutOfRange { index: usize, qubits: usize },

    #[error("need at least 2 qubits, got {0}")]
    TooFewQubits(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("site {site} is not a type-B location for n={n}, R={rounds}")]
    NotTypeB { site: usize, n: usize, rounds: usize },

    #[error("pair index {index} out of range 1..={max}")]
    PairOutOfRange { index: usize, max: usize },

    #[error("rule {0} is not applicable here")]
    RuleNotApplicable(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("dimension {dim} exceeds limit {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
