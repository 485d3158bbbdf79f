use thiserror::Error;

use beamtrack::agent::AgentError;
use beamtrack::scenario::ScenarioError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("artifact mismatch: {0}")]
    Mismatch(String),
    #[error("i/o on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Training(_) => 3,
            CliError::Mismatch(_) => 4,
            CliError::Io { .. } => 1,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<AgentError> for CliError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Config(m) => CliError::Config(m),
            AgentError::Mismatch(m) => CliError::Mismatch(m),
            other => CliError::Training(other.to_string()),
        }
    }
}
