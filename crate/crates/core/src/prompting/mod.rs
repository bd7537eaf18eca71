//! Observation rendering, prompt assembly and response parsing.

mod fewshot;
mod parse;
mod prompt;
mod render;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::actions::MetaAction;

pub use fewshot::{FewShotExample, FewShotStore};
pub use parse::{format_response, parse_response, ParseError};
pub use prompt::{build_prompt, system_text, ChatMessage, ChatRole, PromptBundle};
pub use render::{fmt1, render_observation};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    #[default]
    Standard,
    ChainOfThought,
}

impl PromptMode {
    pub const ALL: [PromptMode; 2] = [PromptMode::Standard, PromptMode::ChainOfThought];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptMode::Standard => "standard",
            PromptMode::ChainOfThought => "chain_of_thought",
        }
    }
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PromptMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(PromptMode::Standard),
            "chain_of_thought" | "cot" => Ok(PromptMode::ChainOfThought),
            other => Err(format!("unknown prompting mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionSource {
    Llm,
    Rule,
    Replay,
}

/// A policy's choice for one decision tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub thoughts: Option<String>,
    pub action: MetaAction,
    pub raw_response: String,
    pub source: DecisionSource,
    /// Wall-clock seconds spent deciding; zero for rule and replay policies.
    pub latency: f64,
}
