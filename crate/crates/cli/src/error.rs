use boussinesq_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("solver failure: {0}")]
    Solver(CoreError),

    /// A check or study ran to completion but missed its threshold.
    #[error("threshold not met: {0}")]
    Threshold(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(msg: String) -> Self {
        CliError::Config(msg)
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) | CliError::Io { .. } => 3,
            CliError::Threshold(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            // problems with the input rather than with the numerics
            CoreError::InvalidMesh(_)
            | CoreError::EmptyDirichletBoundary
            | CoreError::InvalidParameter { .. }
            | CoreError::SetValuedLaw(_)
            | CoreError::InvalidLaw(_)
            | CoreError::Conductivity(_)
            | CoreError::H0Violated(_) => CliError::Config(e.to_string()),
            other => CliError::Solver(other),
        }
    }
}
