use std::path::PathBuf;

use thiserror::Error;

use crate::prompting::PromptMode;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Configuration and I/O failures. Policy-level faults (unreachable endpoint,
/// unparsable response) never surface here; they are recorded in the trace.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("unknown scenario `{0}` (not a shipped name or readable file)")]
    UnknownScenario(String),

    #[error("invalid road network: {0}")]
    Road(String),

    #[error("unknown policy kind `{0}`")]
    UnknownPolicy(String),

    #[error("no few-shot examples for prompting mode `{0}`")]
    MissingExamples(PromptMode),

    #[error("malformed few-shot file {path}: {reason}")]
    FewShot { path: PathBuf, reason: String },

    #[error("trace is empty")]
    EmptyTrace,

    #[error("malformed trace line {line}: {reason}")]
    TraceFormat { line: usize, reason: String },

    #[error("policy misconfigured: {0}")]
    Policy(String),

    #[error("failed to parse scenario file {path}: {source}")]
    ScenarioParse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
