use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("cannot evaluate a series with negative orders at lambda = 0")]
    EvalAtPole,

    #[error("recentering a series with negative orders is not supported (min order {0})")]
    NegativeOrderRecenter(i32),

    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),

    #[error("division by zero (coefficient pole)")]
    DivisionByZero,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("schema error at {path}: {msg}")]
    Schema { path: String, msg: String },

    #[error("insufficient truncation: {0}")]
    InsufficientTruncation(String),

    #[error("leading matrix has nearly repeated eigenvalues (gap {gap:e} < {tol:e})")]
    DegenerateLeadingEigenvalues { gap: f64, tol: f64 },

    #[error("seed solve did not converge: residual {residual:e} after {iterations} Newton steps")]
    NotConverged { residual: f64, iterations: usize },

    #[error("stacked system residual {residual:e} at order {order} exceeds tolerance")]
    ResidualTooLarge { order: usize, residual: f64 },

    #[error("integration step failed at x = {x}: error estimate {estimate:e} exceeds {tol:e}")]
    StepFailure { x: f64, estimate: f64, tol: f64 },

    #[error("regular propagation needs m = 0, model has m = {0}")]
    ModelNotTheorem2(i32),

    #[error("Psi0 is degenerate at x = {x} (|det| = {det:e})")]
    DegeneratePsi0 { x: f64, det: f64 },

    #[error("grid too coarse: {0} samples, need at least 5")]
    GridTooCoarse(usize),

    #[error("closed-form Lambda evaluation is only available at regular singular points")]
    UnsupportedLambdaEvaluation,

    #[error("unknown catalog entry `{0}`")]
    UnknownEntry(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
