use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// The scenario is unusable as written; nothing was integrated or written.
    #[error("{0}")]
    Validation(String),
    /// Integration or output failed after validation passed.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

pub(crate) fn invalid(e: geomech::Error) -> CliError {
    CliError::Validation(e.to_string())
}

pub(crate) fn runtime(e: geomech::Error) -> CliError {
    CliError::Runtime(e.to_string())
}
