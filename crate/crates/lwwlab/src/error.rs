use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LwwError {
    /// A point or vertex does not belong to the graph in use.
    #[error("domain error: {0}")]
    Domain(String),
    /// An operation was called with arguments that violate its contract.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// The job would exceed the configured enumeration budget.
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, LwwError>;

pub(crate) fn precondition<T>(msg: impl Into<String>) -> Result<T> {
    Err(LwwError::Precondition(msg.into()))
}
