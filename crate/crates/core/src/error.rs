use thiserror::Error;

/// Errors raised by the sensitivity toolkit.
///
/// Every variant maps to a short machine-readable tag (see [`Error::tag`]) so
/// front ends can report failures on a single parseable line.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite model output at {location}: {detail}")]
    Evaluation { location: String, detail: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate model ({metric}): {detail}")]
    Degenerate { metric: String, detail: String },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::Evaluation { .. } => "evaluation",
            Error::Precondition(_) => "precondition",
            Error::Degenerate { .. } => "degenerate",
            Error::Numerical(_) => "numerical",
        }
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn degenerate(metric: &str, detail: impl Into<String>) -> Self {
        Error::Degenerate {
            metric: metric.to_string(),
            detail: detail.into(),
        }
    }

    /// Attach a metric name to a degenerate-model error that lacks one.
    pub fn in_metric(self, metric: &str) -> Self {
        match self {
            Error::Degenerate { detail, .. } => Error::Degenerate {
                metric: metric.to_string(),
                detail,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
