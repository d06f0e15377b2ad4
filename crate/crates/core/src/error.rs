use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("flow degeneracy at s = {s}: {detail}")]
    FlowDegenerate { s: f64, triangle: Option<usize>, detail: String },

    #[error("mesh validation failed: {0}")]
    MeshValidation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residuals {history:?})")]
    Convergence { iterations: usize, history: Vec<f64> },

    #[error("data invariant violated: {0}")]
    DataInvariant(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status: 2 for input and configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SingularSystem(_) | Error::Convergence { .. } | Error::FlowDegenerate { .. } => 3,
            _ => 2,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
