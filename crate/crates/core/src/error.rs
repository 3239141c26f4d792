use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid needs at least 3 nodes per side, got {0}")]
    InvalidGrid(usize),
    #[error("shape mismatch: expected {expected} nodes, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("negative density {value} at node {node}")]
    NegativeDensity { node: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownName {
        kind: &'static str,
        name: String,
        available: String,
    },
    #[error("root finder failed after {iterations} iterations on [{lo}, {hi}]")]
    RootNotFound { lo: f64, hi: f64, iterations: usize },
    #[error("linear solver did not converge: residual {residual:e} after {iterations} iterations")]
    LinearSolver { residual: f64, iterations: usize },
    #[error("step sizes violate the convergence bound: {0}")]
    StepSize(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("non-finite iterate at iteration {0}")]
    NonFinite(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
