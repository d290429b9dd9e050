use thiserror::Error;

pub type Result<T, E = BomeError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum BomeError {
    /// Every violated constraint, in the order it was checked.
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("oracle does not provide {0}")]
    MissingCapability(&'static str),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("attraction point not reached after {iters} iterations (gradient norm {grad_norm:e})")]
    NotConverged { iters: usize, grad_norm: f64 },

    #[error("trace contains no KKT evaluations")]
    NoKktEvaluations,

    #[error("{0}")]
    Parse(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl BomeError {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        BomeError::Io {
            context: context.into(),
            source,
        }
    }
}
