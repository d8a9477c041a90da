use thiserror::Error;

/// Errors raised while building or validating instances and models.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {what} (row {row}): {reason}")]
    InvalidRow {
        what: &'static str,
        row: usize,
        reason: String,
    },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("hub {to} is unreachable from hub {from}")]
    Unreachable { from: usize, to: usize },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("solution rejected: {0}")]
    Rejected(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("limit reached without a solution: {0}")]
    Limit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
