use thiserror::Error;

/// Errors raised by the evaluation harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),

    #[error("class {class} has no records in the prediction pool")]
    Coverage { class: usize },

    #[error("infeasible draw{}: class {class} needs {requested} samples but the pool has {available} (short by {})",
        .synthesization.map(|t| format!(" at t={t}")).unwrap_or_default(),
        .requested - .available)]
    InfeasibleDraw {
        synthesization: Option<usize>,
        class: usize,
        requested: usize,
        available: usize,
    },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("incompatible reports: mismatched {}", .fields.join(", "))]
    Incompatible { fields: Vec<String> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
