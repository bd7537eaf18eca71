//! Decision layer: rule oracles, the chat-completion policy and trace replay.

pub mod llm;
pub mod rules;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::actions::MetaAction;
use crate::error::{Error, Result};
use crate::prompting::{build_prompt, parse_response, Decision, DecisionSource, PromptMode};
use crate::tools::{Memory, ObservationBundle};

pub use llm::{LlmClient, LlmEndpoint, LlmError, LlmReply};
pub use rules::{rule_policy_step, RuleConfig, RuleKind, RuleOutcome, StyleTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    LlmStandard,
    LlmCot,
    RuleCheckedOvertaker,
    RuleNaiveOvertaker,
    RuleAggressive,
    RuleConservative,
    RuleBalanced,
    Replay,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 8] = [
        PolicyKind::LlmStandard,
        PolicyKind::LlmCot,
        PolicyKind::RuleCheckedOvertaker,
        PolicyKind::RuleNaiveOvertaker,
        PolicyKind::RuleAggressive,
        PolicyKind::RuleConservative,
        PolicyKind::RuleBalanced,
        PolicyKind::Replay,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::LlmStandard => "llm_standard",
            PolicyKind::LlmCot => "llm_cot",
            PolicyKind::RuleCheckedOvertaker => "rule_checked_overtaker",
            PolicyKind::RuleNaiveOvertaker => "rule_naive_overtaker",
            PolicyKind::RuleAggressive => "rule_aggressive",
            PolicyKind::RuleConservative => "rule_conservative",
            PolicyKind::RuleBalanced => "rule_balanced",
            PolicyKind::Replay => "replay",
        }
    }

    pub fn rule_kind(self) -> Option<RuleKind> {
        Some(match self {
            PolicyKind::RuleCheckedOvertaker => RuleKind::CheckedOvertaker,
            PolicyKind::RuleNaiveOvertaker => RuleKind::NaiveOvertaker,
            PolicyKind::RuleAggressive => RuleKind::Aggressive,
            PolicyKind::RuleConservative => RuleKind::Conservative,
            PolicyKind::RuleBalanced => RuleKind::Balanced,
            _ => return None,
        })
    }

    pub fn prompt_mode(self) -> Option<PromptMode> {
        match self {
            PolicyKind::LlmStandard => Some(PromptMode::Standard),
            PolicyKind::LlmCot => Some(PromptMode::ChainOfThought),
            _ => None,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| Error::UnknownPolicy(s.to_string()))
    }
}

/// Non-fatal policy failure; the episode continues with IDLE.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fault {
    ParseFailure { detail: String, raw: String },
    LlmUnavailable { detail: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub decision: Decision,
    pub fault: Option<Fault>,
}

impl PolicyOutput {
    fn ok(decision: Decision) -> Self {
        Self { decision, fault: None }
    }

    fn idle_after(fault: Fault, raw: String, source: DecisionSource, latency: f64) -> Self {
        Self {
            decision: Decision {
                thoughts: None,
                action: MetaAction::Idle,
                raw_response: raw,
                source,
                latency,
            },
            fault: Some(fault),
        }
    }
}

enum Backend {
    Rule { kind: RuleKind, config: RuleConfig },
    Llm { mode: PromptMode, client: LlmClient },
    Replay { actions: VecDeque<MetaAction> },
}

/// A policy bound to one episode.
pub struct Policy {
    kind: PolicyKind,
    backend: Backend,
}

impl fmt::Debug for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Policy").field("kind", &self.kind).finish_non_exhaustive()
    }
}

impl Policy {
    pub fn rule(kind: PolicyKind, config: RuleConfig) -> Result<Self> {
        let rule = kind
            .rule_kind()
            .ok_or_else(|| Error::Policy(format!("{kind} is not a rule policy")))?;
        Ok(Self {
            kind,
            backend: Backend::Rule { kind: rule, config },
        })
    }

    pub fn llm(kind: PolicyKind, endpoint: LlmEndpoint) -> Result<Self> {
        let mode = kind
            .prompt_mode()
            .ok_or_else(|| Error::Policy(format!("{kind} is not an LLM policy")))?;
        let client = LlmClient::new(endpoint).map_err(|e| Error::Policy(e.to_string()))?;
        Ok(Self {
            kind,
            backend: Backend::Llm { mode, client },
        })
    }

    /// Replays recorded policy outputs in order, then IDLE once exhausted.
    pub fn replay(actions: impl IntoIterator<Item = MetaAction>) -> Self {
        Self {
            kind: PolicyKind::Replay,
            backend: Backend::Replay {
                actions: actions.into_iter().collect(),
            },
        }
    }

    /// Builds any non-replay kind with default rule tables and the given
    /// endpoint for LLM kinds.
    pub fn from_kind(kind: PolicyKind, rules: RuleConfig, endpoint: Option<LlmEndpoint>) -> Result<Self> {
        match kind {
            PolicyKind::LlmStandard | PolicyKind::LlmCot => Self::llm(kind, endpoint.unwrap_or_else(LlmEndpoint::from_env)),
            PolicyKind::Replay => Err(Error::Policy("replay policies are built from a trace".into())),
            _ => Self::rule(kind, rules),
        }
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn prompt_mode(&self) -> Option<PromptMode> {
        match &self.backend {
            Backend::Llm { mode, .. } => Some(*mode),
            _ => None,
        }
    }

    /// Chooses the action for the current decision tick. Never fails: LLM
    /// transport or parse problems degrade to IDLE with a fault attached.
    pub fn decide(&mut self, obs: &ObservationBundle, memory: &Memory) -> PolicyOutput {
        match &mut self.backend {
            Backend::Rule { kind, config } => {
                let out = rule_policy_step(*kind, config, &obs.perception, &obs.localization, memory);
                PolicyOutput::ok(Decision {
                    thoughts: Some(out.rationale),
                    action: out.action,
                    raw_response: String::new(),
                    source: DecisionSource::Rule,
                    latency: 0.0,
                })
            }
            Backend::Replay { actions } => PolicyOutput::ok(Decision {
                thoughts: None,
                action: actions.pop_front().unwrap_or(MetaAction::Idle),
                raw_response: String::new(),
                source: DecisionSource::Replay,
                latency: 0.0,
            }),
            Backend::Llm { mode, client } => {
                let command = memory.latest_command().map(|c| c.text.as_str());
                let bundle = match build_prompt(*mode, &memory.few_shot_store, &obs.text, command) {
                    Ok(b) => b,
                    Err(e) => {
                        return PolicyOutput::idle_after(
                            Fault::LlmUnavailable { detail: e.to_string() },
                            String::new(),
                            DecisionSource::Llm,
                            0.0,
                        )
                    }
                };
                match client.chat(&bundle) {
                    Err(e) => PolicyOutput::idle_after(
                        Fault::LlmUnavailable { detail: e.to_string() },
                        String::new(),
                        DecisionSource::Llm,
                        0.0,
                    ),
                    Ok(reply) => {
                        let latency = reply.latency.as_secs_f64();
                        match parse_response(&reply.text) {
                            Ok(mut d) => {
                                d.latency = latency;
                                PolicyOutput::ok(d)
                            }
                            Err(e) => PolicyOutput::idle_after(
                                Fault::ParseFailure {
                                    detail: e.to_string(),
                                    raw: reply.text.clone(),
                                },
                                reply.text,
                                DecisionSource::Llm,
                                latency,
                            ),
                        }
                    }
                }
            }
        }
    }
}
