use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("no solution: {0}")]
    Nonexistence(String),
    #[error("not converged: {0}")]
    NoConvergence(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Nonexistence(_) => 4,
            CliError::NoConvergence(_) => 5,
            CliError::Other(_) => 1,
        }
    }
}
