use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input outside the mathematical domain of an operation (non-PSD state,
    /// parameter out of range, malformed table).
    #[error("domain error: {0}")]
    Domain(String),

    /// A criterion was asked to act on statistics it is not stated for.
    #[error("criterion not applicable: {0}")]
    Scope(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    /// Parameters that are well formed but describe no physical model
    /// (for example a correlation entry beyond unit magnitude).
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
