use std::path::PathBuf;

use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: manifold_icp::Error,
    },

    #[error(transparent)]
    Core(#[from] manifold_icp::Error),

    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Core(manifold_icp::Error::NonConvergence { .. }) => "non-convergence",
            CliError::Core(_) => "computation",
            CliError::Invalid(_) => "invalid-input",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Parse { .. } | CliError::Invalid(_) => 4,
            CliError::Core(manifold_icp::Error::NonConvergence { .. }) => 5,
            CliError::Core(_) => 4,
        }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } }).to_string()
    }
}

pub type CliResult<T> = Result<T, CliError>;
