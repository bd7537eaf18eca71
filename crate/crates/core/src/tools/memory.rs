use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::prompting::FewShotStore;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrivingStyle {
    Aggressive,
    Conservative,
    #[default]
    None,
}

impl fmt::Display for DrivingStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DrivingStyle::Aggressive => "aggressive",
            DrivingStyle::Conservative => "conservative",
            DrivingStyle::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandEntry {
    pub time: f64,
    pub text: String,
}

const AGGRESSIVE_CUES: &[&str] = &["aggressiv"];
const CONSERVATIVE_CUES: &[&str] = &["conservativ", "careful", "cautious"];

/// Keyword intent classifier. When both intents appear, the one mentioned
/// last wins.
pub fn classify_style(text: &str) -> Option<DrivingStyle> {
    let lower = text.to_lowercase();
    let last = |cues: &[&str]| cues.iter().filter_map(|c| lower.rfind(c)).max();
    match (last(AGGRESSIVE_CUES), last(CONSERVATIVE_CUES)) {
        (Some(a), Some(c)) if a > c => Some(DrivingStyle::Aggressive),
        (Some(_), Some(_)) => Some(DrivingStyle::Conservative),
        (Some(_), None) => Some(DrivingStyle::Aggressive),
        (None, Some(_)) => Some(DrivingStyle::Conservative),
        (None, None) => None,
    }
}

pub fn default_traffic_rules() -> Vec<String> {
    [
        "Keep right unless overtaking.",
        "Overtake on the left.",
        "Do not exceed the posted speed limit unless the driver asks for faster driving.",
        "Keep a safe following distance.",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Long-lived facts the policy may draw on: local rules, the driver's
/// command history and preferences, and the few-shot example sets.
#[derive(Debug, Clone)]
pub struct Memory {
    pub speed_limit: f64,
    pub traffic_rules: Vec<String>,
    pub command_log: Vec<CommandEntry>,
    pub active_style: DrivingStyle,
    /// Lane the route was started in; an overtake returns here.
    pub home_lane: Option<i32>,
    pub few_shot_store: Arc<FewShotStore>,
}

impl Memory {
    pub fn new(speed_limit: f64, few_shot_store: Arc<FewShotStore>) -> Self {
        Self {
            speed_limit,
            traffic_rules: default_traffic_rules(),
            command_log: Vec::new(),
            active_style: DrivingStyle::None,
            home_lane: None,
            few_shot_store,
        }
    }

    /// Appends to the command log and updates the active style when the
    /// text carries a recognisable intent. Times earlier than the last entry
    /// are raised to it so the log stays ordered.
    pub fn record_command(&mut self, text: &str, time: f64) {
        let time = self.command_log.last().map_or(time, |last| time.max(last.time));
        self.command_log.push(CommandEntry {
            time,
            text: text.to_string(),
        });
        if let Some(style) = classify_style(text) {
            self.active_style = style;
        }
    }

    pub fn latest_command(&self) -> Option<&CommandEntry> {
        self.command_log.last()
    }
}
