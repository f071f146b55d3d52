use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("annihilated mode carries {0:e} of the field energy (strict mode)")]
    ZeroMode(f64),
    #[error("compatibility condition violated: {0}")]
    Compatibility(String),
    #[error("exponent relation {relation} violated: {detail}")]
    Exponent { relation: &'static str, detail: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular system: pivot or determinant {0:e}")]
    Singular(f64),
    #[error("Neumann series gate failed: gamma_L = {0} >= 1")]
    SeriesGate(f64),
    #[error("iteration failed: {0}")]
    Iteration(String),
    #[error("field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
