use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("operation supports only n = 1, got n = {0}")]
    UnsupportedDimension(usize),

    #[error("state does not match system variant: {0}")]
    VariantMismatch(String),

    #[error("unsupported for this variant: {0}")]
    Unsupported(String),

    #[error("ray through the state misses the Nehari manifold (quartic part {quartic:.3e}, cubic part {cubic:.3e})")]
    ProjectionFailure { quartic: f64, cubic: f64 },

    #[error("solver did not converge: best residual {best_residual:.3e} after {iterations} iterations")]
    NonConvergence { best_residual: f64, iterations: usize },

    #[error("dilation pushes a mass fraction {lost_fraction:.3e} outside the box")]
    Truncation { lost_fraction: f64 },

    #[error("beta = {beta} is within {tol:e} of the threshold {lambda}; h1 block {h1_block:.3e}, h2 block {h2_block:.3e}")]
    IndeterminateClassification {
        beta: f64,
        lambda: f64,
        tol: f64,
        h1_block: f64,
        h2_block: f64,
    },

    #[error("field container error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
