//! Closed-loop highway driving simulator with pluggable decision policies.
//!
//! A policy (a chat-completion language model, a deterministic rule table or
//! a replayed trace) receives a textual observation assembled by the tool
//! layer, picks one of five discrete meta-actions once per decision tick, and
//! the low-level controllers turn that choice into steering and throttle.
//! Free-text driver commands recorded mid-episode steer the driving style,
//! and every episode is scored from its trace.
//!
//! The crate is organised bottom-up:
//!
//! * [`sim`] - road geometry, kinematics, controllers, IDM traffic, collisions.
//! * [`actions`] - the meta-action alphabet and its safety validator.
//! * [`tools`] - perception, localization, memory and the cabin monitor stub.
//! * [`prompting`] - observation rendering, prompt assembly, response parsing.
//! * [`policies`] - rule oracles, the chat-completion client, trace replay.
//! * [`harness`] - scenarios, episodes, traces, metrics and batch runs.

pub mod actions;
pub mod error;
pub mod harness;
pub mod policies;
pub mod prompting;
pub mod sim;
pub mod tools;

pub use actions::{apply_meta_action, validate_action, MetaAction, RejectReason, ValidationResult};
pub use error::{Error, Result};
pub use harness::{
    compare_behaviors, compute_metrics, run_episode, BehaviorReport, Episode, EpisodeMetrics,
    Outcome, Scenario, Trace, TraceEvent,
};
pub use policies::{Policy, PolicyKind};
pub use prompting::{Decision, PromptMode};
pub use sim::{ControlTarget, RoadNetwork, SimConfig, VehicleId, VehicleState, World};
pub use tools::{Memory, Perception};
