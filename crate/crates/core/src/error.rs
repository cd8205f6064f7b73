use thiserror::Error;

/// Errors raised by the toolkit's operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid function: {0}")]
    InvalidFunction(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dual grid does not cover the slope range [{required_lo}, {required_hi}]: {detail}")]
    Range {
        required_lo: f64,
        required_hi: f64,
        detail: String,
    },

    #[error("grid too small: tail mass {tail:.3e} exceeds 1e-6 of bulk {bulk:.3e}; {suggestion}")]
    GridTooSmall { tail: f64, bulk: f64, suggestion: String },

    #[error("not admissible: {0}")]
    NotAdmissible(String),

    #[error("not absolutely continuous: {0}")]
    NotAbsolutelyContinuous(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("infeasible target: {0}")]
    InfeasibleTarget(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConverged { iterations: usize, residual: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("usage: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;
