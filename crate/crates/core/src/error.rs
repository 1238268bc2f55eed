use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum SqeError {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("invalid index: {0}")]
    InvalidIndex(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),

    #[error("limit exceeded: {0}")]
    Limit(String),

    #[error("structure not applicable: {0}")]
    StructureNotApplicable(String),

    /// No restart converged. Carries the best (unconverged) value seen, if any.
    #[error("solver failure: {message}")]
    SolverFailure { message: String, best_g: Option<f64> },

    #[error("soundness: {0}")]
    Soundness(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("cross-check mismatch: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SqeError {
    /// Short machine-readable kind, used in CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            SqeError::InvalidShape(_) => "invalid_shape",
            SqeError::InvalidIndex(_) => "invalid_index",
            SqeError::InvalidArgument(_) => "invalid_argument",
            SqeError::NumericalInconsistency(_) => "numerical_inconsistency",
            SqeError::Limit(_) => "limit",
            SqeError::StructureNotApplicable(_) => "structure_not_applicable",
            SqeError::SolverFailure { .. } => "solver_failure",
            SqeError::Soundness(_) => "soundness",
            SqeError::Parse(_) => "parse",
            SqeError::Mismatch(_) => "mismatch",
            SqeError::Json(_) => "json",
            SqeError::Io(_) => "io",
        }
    }
}

pub type Result<T, E = SqeError> = std::result::Result<T, E>;
