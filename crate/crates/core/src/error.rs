use thiserror::Error;

/// Failures raised by the numeric core.
///
/// Values are carried as `f64` regardless of the scalar type the
/// computation ran in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{context}: matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite {
        context: String,
        min_eigenvalue: f64,
    },

    #[error("{context}: entries ({row},{col}) and ({col},{row}) differ by {difference:e}")]
    Asymmetric {
        context: String,
        row: usize,
        col: usize,
        difference: f64,
    },

    #[error("lsqr contract violated in {equation}: residual {residual:e} exceeds {tolerance:e}")]
    LsqrContractViolation {
        equation: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("initial point outside the central-path neighborhood: {measured:e} > {bound:e}")]
    Neighborhood { measured: f64, bound: f64 },

    #[error("no initial X supplied and the problem file carries no X0")]
    MissingInitialPoint,

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("problem file: {0}")]
    Parse(String),

    #[error("duality gap must be positive, got {0:e}")]
    NonPositiveGap(f64),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("trace line {line}: {message}")]
    TraceParse { line: usize, message: String },

    #[error("trace schema {found:?} is not supported (expected {expected:?})")]
    SchemaMismatch { found: String, expected: String },

    #[error("trace was written for problem {trace} but the supplied problem hashes to {problem}")]
    HashMismatch { trace: String, problem: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
