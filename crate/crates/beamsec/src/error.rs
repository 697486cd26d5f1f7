use std::fmt::Display;

/// Failure classes of a run, each with its own process exit code.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl RunError {
    pub fn config(field: &str, e: impl Display) -> Self {
        RunError::Config(format!("{field}: {e}"))
    }

    pub fn io(what: impl Display, e: impl Display) -> Self {
        RunError::Io(format!("{what}: {e}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io(_) => 2,
            RunError::Solver(_) => 3,
            RunError::Verification(_) => 4,
        }
    }
}
