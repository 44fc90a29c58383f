use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("degenerate labels for attribute `{attribute}`: only one class present")]
    DegenerateLabels { attribute: String },

    #[error("operation `{operation}` is not supported for {kind} models")]
    UnsupportedForKind {
        operation: &'static str,
        kind: &'static str,
    },

    #[error("traversal diverged at step {step}")]
    TraversalDiverged { step: usize },

    #[error("inversion failed: all {restarts} restarts diverged")]
    InversionFailed { restarts: usize },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
