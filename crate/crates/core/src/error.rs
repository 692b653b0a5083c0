use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh request: {0}")]
    InvalidMesh(String),

    #[error("boundary partition has no Dirichlet part; Gamma_0 must be nonempty")]
    EmptyDirichletBoundary,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("law `{0}` is set-valued at its breakpoints; mollify it before using it as a boundary term")]
    SetValuedLaw(String),

    #[error("invalid law description: {0}")]
    InvalidLaw(String),

    #[error("hypothesis H(k) violated: {0}")]
    Conductivity(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("singular saddle-point system (check constraint setup): {0}")]
    SingularSystem(String),

    #[error("Picard iteration did not converge at step {step} ({field}) after {iterations} iterations; last increments {history:?}; try a smaller time step or damping")]
    PicardDivergence {
        step: usize,
        field: &'static str,
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("smallness condition H0 violated: {0}")]
    H0Violated(String),

    #[error("history buffer no longer holds step {0}")]
    HistoryEvicted(usize),

    #[error("study failed: {0}")]
    Study(String),
}

pub type Result<T> = std::result::Result<T, Error>;
