use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// One problem with a scenario, located by its dotted key path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("TOML syntax: {0}")]
    Syntax(String),

    #[error("invalid scenario:\n{}", list(.0))]
    Invalid(Vec<Issue>),

    #[error("serializing: {0}")]
    Serialize(String),

    #[error("unknown example `{0}`; see `list-examples`")]
    UnknownExample(String),

    #[error("{experiment} failed: {source}")]
    Run {
        experiment: &'static str,
        #[source]
        source: nvfluidics_core::Error,
    },

    #[error(transparent)]
    Core(#[from] nvfluidics_core::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("output digests differ from the manifest:\n{}", .0.join("\n"))]
    DigestMismatch(Vec<String>),
}

fn list(issues: &[Issue]) -> String {
    issues.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n")
}

impl ScenarioError {
    /// Key paths named by a validation failure.
    pub fn paths(&self) -> Vec<&str> {
        match self {
            Self::Invalid(issues) => issues.iter().map(|i| i.path.as_str()).collect(),
            _ => Vec::new(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Syntax(_) | Self::Invalid(_) | Self::UnknownExample(_) => 2,
            Self::DigestMismatch(_) => 3,
            _ => 1,
        }
    }
}
