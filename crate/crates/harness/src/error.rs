use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },

    #[error(transparent)]
    Core(#[from] ergolevy::Error),

    #[error("{failed} of {total} replicas failed (first: {first})")]
    ReplicaFailure { failed: usize, total: usize, first: ergolevy::Error },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config { line: None, msg: msg.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    /// Process exit code: 2 configuration, 3 divergence or too many failed
    /// replicas, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } => 2,
            HarnessError::Core(e) => match e.root() {
                ergolevy::Error::Divergence { .. } | ergolevy::Error::PoisonedAccumulator(_) => 3,
                _ => 2,
            },
            HarnessError::ReplicaFailure { .. } => 3,
            HarnessError::Io { .. } => 4,
        }
    }
}
