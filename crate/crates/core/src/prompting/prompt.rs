use serde::{Deserialize, Serialize};

use super::fewshot::FewShotStore;
use super::PromptMode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub mode: PromptMode,
    pub system_text: String,
    /// (observation, exemplar response) pairs in presentation order.
    pub few_shot: Vec<(String, String)>,
    pub observation_text: String,
    pub command_text: Option<String>,
}

const ROLE: &str = "\
You are the decision-making module of an autonomous vehicle driving on a multi-lane highway. \
Perception, localization and memory tools describe the scene to you; a low-level controller \
with lane keeping always active executes whatever you choose. Lanes are numbered from the \
rightmost lane, which is lane 0, increasing to the left.";

const ALPHABET: &str = "\
Available actions (answer with the code or the name):
0: LANE_LEFT - change to the lane on the left
1: IDLE - keep the current lane and speed
2: LANE_RIGHT - change to the lane on the right
3: FASTER - raise the target speed by 2 m/s
4: SLOWER - lower the target speed by 2 m/s";

const COT_FORMAT: &str = "\
Think step by step: check the gap and closing speed to the vehicle ahead, check that any \
destination lane is clear both ahead and behind, respect the driver's instructions and the \
traffic rules, then output `Action: <code>` on the final line.";

const STANDARD_FORMAT: &str = "Respond with a single line of the form `Action: <code>` and nothing else.";

pub fn system_text(mode: PromptMode) -> String {
    let format = match mode {
        PromptMode::Standard => STANDARD_FORMAT,
        PromptMode::ChainOfThought => COT_FORMAT,
    };
    format!("{ROLE}\n\n{ALPHABET}\n\n{format}")
}

/// Assembles system text, the mode's exemplars and the current observation.
/// A driver command is appended as its own instruction section.
pub fn build_prompt(
    mode: PromptMode,
    store: &FewShotStore,
    observation_text: &str,
    command: Option<&str>,
) -> Result<PromptBundle> {
    let examples = store.examples(mode).ok_or(Error::MissingExamples(mode))?;
    Ok(PromptBundle {
        mode,
        system_text: system_text(mode),
        few_shot: examples
            .map(|e| (e.observation.clone(), e.response.clone()))
            .collect(),
        observation_text: observation_text.to_string(),
        command_text: command.map(str::to_string),
    })
}

impl PromptBundle {
    /// Final user turn: observation, then the driver instruction if any.
    pub fn user_text(&self) -> String {
        match &self.command_text {
            Some(c) => format!(
                "{}\n\nDriver instruction: {c}\nFollow this instruction whenever it is safe to do so.",
                self.observation_text
            ),
            None => self.observation_text.clone(),
        }
    }

    /// Chat transcript: system, alternating exemplar user/assistant turns,
    /// then the live observation.
    pub fn messages(&self) -> Vec<ChatMessage> {
        let mut out = Vec::with_capacity(2 + 2 * self.few_shot.len());
        out.push(ChatMessage {
            role: ChatRole::System,
            content: self.system_text.clone(),
        });
        for (obs, resp) in &self.few_shot {
            out.push(ChatMessage {
                role: ChatRole::User,
                content: obs.clone(),
            });
            out.push(ChatMessage {
                role: ChatRole::Assistant,
                content: resp.clone(),
            });
        }
        out.push(ChatMessage {
            role: ChatRole::User,
            content: self.user_text(),
        });
        out
    }
}
