use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("matrix is singular to working precision (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NotConverged {
        what: &'static str,
        iterations: usize,
    },

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("degenerate gain equation: {0}")]
    Degenerate(String),

    #[error("certificate inconsistency: {0}")]
    Certificate(String),

    #[error("synthesis failed: {0}")]
    Synthesis(String),

    #[error("invalid LMI problem: {0}")]
    InvalidProblem(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("design matrix is rank deficient: {0}")]
    Collinear(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("solution does not match the model: {0}")]
    StaleSolution(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
