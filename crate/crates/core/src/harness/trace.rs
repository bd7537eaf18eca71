use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::scenario::Scenario;
use crate::actions::{MetaAction, RejectReason, Verdict};
use crate::error::{Error, Result};
use crate::policies::{Fault, PolicyKind};
use crate::prompting::{DecisionSource, PromptMode};
use crate::sim::{ControlTarget, VehicleState, EGO_ID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Crashed,
    Timeout,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::Crashed => "crashed",
            Outcome::Timeout => "timeout",
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What an episode was run with; enough to re-simulate it under replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub policy: PolicyKind,
    pub seed: u64,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub t: f64,
    pub vehicles: Vec<VehicleState>,
    pub ego_target: ControlTarget,
}

impl FrameRecord {
    pub fn ego(&self) -> Option<&VehicleState> {
        self.vehicles.iter().find(|v| v.id == EGO_ID)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub t: f64,
    pub observation_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_mode: Option<PromptMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thoughts: Option<String>,
    /// What the policy proposed.
    pub action: MetaAction,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<RejectReason>,
    /// What the controller actually received.
    pub applied: MetaAction,
    pub source: DecisionSource,
    pub latency: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub raw_response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceEvent {
    Header(TraceHeader),
    Frame(FrameRecord),
    Decision(DecisionRecord),
    Command {
        t: f64,
        text: String,
    },
    Fault {
        t: f64,
        #[serde(flatten)]
        fault: Fault,
    },
    Terminal {
        t: f64,
        outcome: Outcome,
    },
}

impl TraceEvent {
    pub fn tag(&self) -> &'static str {
        match self {
            TraceEvent::Header(_) => "header",
            TraceEvent::Frame(_) => "frame",
            TraceEvent::Decision(_) => "decision",
            TraceEvent::Command { .. } => "command",
            TraceEvent::Fault { .. } => "fault",
            TraceEvent::Terminal { .. } => "terminal",
        }
    }

    pub fn time(&self) -> Option<f64> {
        match self {
            TraceEvent::Header(_) => None,
            TraceEvent::Frame(f) => Some(f.t),
            TraceEvent::Decision(d) => Some(d.t),
            TraceEvent::Command { t, .. } | TraceEvent::Fault { t, .. } | TraceEvent::Terminal { t, .. } => Some(*t),
        }
    }
}

/// Append-only episode log, persisted as one JSON object per line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: TraceEvent) {
        self.events.push(event);
    }

    pub fn header(&self) -> Option<&TraceHeader> {
        self.events.iter().find_map(|e| match e {
            TraceEvent::Header(h) => Some(h),
            _ => None,
        })
    }

    pub fn frames(&self) -> impl Iterator<Item = &FrameRecord> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Frame(f) => Some(f),
            _ => None,
        })
    }

    pub fn decisions(&self) -> impl Iterator<Item = &DecisionRecord> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Decision(d) => Some(d),
            _ => None,
        })
    }

    pub fn commands(&self) -> impl Iterator<Item = (f64, &str)> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Command { t, text } => Some((*t, text.as_str())),
            _ => None,
        })
    }

    pub fn faults(&self) -> impl Iterator<Item = (f64, &Fault)> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Fault { t, fault } => Some((*t, fault)),
            _ => None,
        })
    }

    pub fn terminal(&self) -> Option<(f64, Outcome)> {
        self.events.iter().find_map(|e| match e {
            TraceEvent::Terminal { t, outcome } => Some((*t, *outcome)),
            _ => None,
        })
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    /// Parses JSONL; blank lines are skipped, line numbers in errors are
    /// 1-based.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Trace> {
        let mut trace = Trace::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let event = serde_json::from_str(&line).map_err(|e| Error::TraceFormat {
                line: i + 1,
                reason: e.to_string(),
            })?;
            trace.push(event);
        }
        Ok(trace)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        self.write_jsonl(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Trace> {
        Trace::read_jsonl(BufReader::new(File::open(path)?))
    }

    /// Hex SHA-256 of the JSONL encoding.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }

    /// Checks structural invariants: exactly one terminal, placed last, and
    /// non-decreasing time within each tag (strictly increasing for frames
    /// and decisions).
    pub fn check(&self) -> Result<()> {
        let bad = |line: usize, reason: &str| Error::TraceFormat {
            line,
            reason: reason.to_string(),
        };
        let terminals = self.events.iter().filter(|e| matches!(e, TraceEvent::Terminal { .. })).count();
        if terminals != 1 {
            return Err(bad(self.events.len(), &format!("expected one terminal event, found {terminals}")));
        }
        if !matches!(self.events.last(), Some(TraceEvent::Terminal { .. })) {
            return Err(bad(self.events.len(), "terminal event is not last"));
        }
        let mut last: std::collections::HashMap<&'static str, f64> = Default::default();
        for (i, e) in self.events.iter().enumerate() {
            let Some(t) = e.time() else { continue };
            if let Some(prev) = last.insert(e.tag(), t) {
                let strict = matches!(e, TraceEvent::Frame(_) | TraceEvent::Decision(_));
                if t < prev || (strict && t == prev) {
                    return Err(bad(i + 1, &format!("{} time went from {prev} to {t}", e.tag())));
                }
            }
        }
        Ok(())
    }
}
