use std::collections::VecDeque;
use std::sync::Arc;

use tracing::debug;

use super::metrics::{compute_metrics, EpisodeMetrics};
use super::scenario::{Scenario, ScheduledCommand};
use super::trace::{DecisionRecord, FrameRecord, Outcome, Trace, TraceEvent, TraceHeader};
use crate::actions::{apply_meta_action, validate_action};
use crate::error::{Error, Result};
use crate::policies::{Fault, Policy};
use crate::prompting::{render_observation, FewShotStore};
use crate::sim::{ControlTarget, World, EGO_ID};
use crate::tools::{localize, perceive, Memory, ObservationBundle};

/// Slack for comparing accumulated step times against schedule times.
const TIME_EPS: f64 = 1e-9;

/// Everything one call to [`Episode::step`] produced, in trace order.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub commands: Vec<(f64, String)>,
    pub fault: Option<Fault>,
    pub decision: Option<DecisionRecord>,
    pub frame: FrameRecord,
    pub terminal: Option<Outcome>,
}

/// One closed-loop run. Owns the world, the memory and the policy; every
/// event is appended to the trace as it happens.
pub struct Episode {
    scenario: Scenario,
    world: World,
    memory: Memory,
    policy: Policy,
    trace: Trace,
    scheduled: VecDeque<ScheduledCommand>,
    live: VecDeque<String>,
    hard_safety: bool,
    outcome: Option<Outcome>,
    last_decision: Option<DecisionRecord>,
}

impl std::fmt::Debug for Episode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Episode")
            .field("scenario", &self.scenario.name)
            .field("policy", &self.policy.kind())
            .field("t", &self.world.time())
            .field("outcome", &self.outcome)
            .finish()
    }
}

impl Episode {
    pub fn new(scenario: &Scenario, policy: Policy, seed: u64) -> Result<Self> {
        Self::with_store(scenario, policy, seed, Arc::new(FewShotStore::builtin()))
    }

    pub fn with_store(scenario: &Scenario, policy: Policy, seed: u64, store: Arc<FewShotStore>) -> Result<Self> {
        scenario.validate()?;
        if let Some(mode) = policy.prompt_mode() {
            if store.len(mode) == 0 {
                return Err(Error::MissingExamples(mode));
            }
        }
        let mut scheduled: Vec<ScheduledCommand> = scenario.commands.clone();
        if let Some(text) = &scenario.initial_command {
            scheduled.insert(0, ScheduledCommand { t: 0.0, text: text.clone() });
        }
        // Stable sort keeps same-time commands in file order.
        scheduled.sort_by(|a, b| a.t.total_cmp(&b.t));

        let mut trace = Trace::new();
        trace.push(TraceEvent::Header(TraceHeader {
            policy: policy.kind(),
            seed,
            scenario: scenario.clone(),
        }));
        Ok(Self {
            world: scenario.instantiate(seed),
            memory: scenario.memory(store),
            policy,
            trace,
            scheduled: scheduled.into(),
            live: VecDeque::new(),
            hard_safety: scenario.hard_safety,
            outcome: None,
            last_decision: None,
            scenario: scenario.clone(),
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn memory(&self) -> &Memory {
        &self.memory
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn time(&self) -> f64 {
        self.world.time()
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    pub fn is_done(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn last_decision(&self) -> Option<&DecisionRecord> {
        self.last_decision.as_ref()
    }

    pub fn hard_safety(&self) -> bool {
        self.hard_safety
    }

    pub fn set_hard_safety(&mut self, on: bool) {
        self.hard_safety = on;
    }

    /// Queues a driver command for the next decision boundary.
    pub fn queue_command(&mut self, text: impl Into<String>) {
        self.live.push_back(text.into());
    }

    /// Time of the next decision boundary at or after now.
    pub fn next_decision_time(&self) -> f64 {
        let k = self.world.config.steps_per_decision();
        let step = self.world.step.div_ceil(k) * k;
        step as f64 * self.world.config.dt
    }

    fn at_decision_boundary(&self) -> bool {
        self.world.step.is_multiple_of(self.world.config.steps_per_decision())
    }

    fn apply_commands(&mut self, t: f64) -> Vec<(f64, String)> {
        let mut applied = Vec::new();
        while self.scheduled.front().is_some_and(|c| c.t <= t + TIME_EPS) {
            let c = self.scheduled.pop_front().expect("front checked");
            applied.push(c.text);
        }
        applied.extend(self.live.drain(..));
        applied
            .into_iter()
            .map(|text| {
                self.memory.record_command(&text, t);
                self.trace.push(TraceEvent::Command { t, text: text.clone() });
                (t, text)
            })
            .collect()
    }

    fn observe(&self) -> Option<ObservationBundle> {
        let perception = perceive(&self.world, EGO_ID)?;
        let localization = localize(&self.world, EGO_ID)?;
        let cabin = self.scenario.cabin;
        let text = render_observation(&perception, &localization, &self.memory, &cabin);
        Some(ObservationBundle {
            time: self.world.time(),
            perception,
            localization,
            cabin,
            text,
        })
    }

    fn decide(&mut self, t: f64) -> (Option<Fault>, Option<DecisionRecord>) {
        let Some(obs) = self.observe() else {
            return (None, None);
        };
        let out = self.policy.decide(&obs, &self.memory);
        if let Some(fault) = &out.fault {
            debug!(t, ?fault, "policy fault, substituting IDLE");
            self.trace.push(TraceEvent::Fault { t, fault: fault.clone() });
        }
        let proposed = out.decision.action;
        let validation = validate_action(&self.world, proposed, self.hard_safety, &self.scenario.envelope);
        let target = self.world.ego_target().unwrap_or(ControlTarget {
            target_lane: obs.localization.lane,
            target_speed: obs.perception.ego_speed,
        });
        self.world.set_ego_target(apply_meta_action(
            target,
            validation.applied,
            &self.world.road,
            self.world.config.hard_speed_cap,
        ));
        let record = DecisionRecord {
            t,
            observation_text: obs.text,
            prompt_mode: self.policy.prompt_mode(),
            thoughts: out.decision.thoughts,
            action: proposed,
            verdict: validation.verdict,
            reason: validation.reason,
            applied: validation.applied,
            source: out.decision.source,
            latency: out.decision.latency,
            raw_response: out.decision.raw_response,
        };
        self.trace.push(TraceEvent::Decision(record.clone()));
        self.last_decision = Some(record.clone());
        (out.fault, Some(record))
    }

    fn check_terminal(&self) -> Option<Outcome> {
        if self.world.is_crashed() {
            return Some(Outcome::Crashed);
        }
        let ego = self.world.ego()?;
        if ego.state.x >= self.world.road.route_end_x {
            Some(Outcome::Completed)
        } else if self.world.time() >= self.scenario.max_time - TIME_EPS {
            Some(Outcome::Timeout)
        } else {
            None
        }
    }

    /// Advances one physics step. At decision boundaries, due commands are
    /// applied first and then the policy runs. Returns `None` once the
    /// episode has ended.
    pub fn step(&mut self) -> Option<StepReport> {
        if self.outcome.is_some() {
            return None;
        }
        let (mut commands, mut fault, mut decision) = (Vec::new(), None, None);
        if self.at_decision_boundary() {
            let t = self.world.time();
            commands = self.apply_commands(t);
            (fault, decision) = self.decide(t);
        }
        self.world.step_world();
        let frame = FrameRecord {
            t: self.world.time(),
            vehicles: self.world.states(),
            ego_target: self.world.ego_target().expect("scenario always spawns an ego"),
        };
        self.trace.push(TraceEvent::Frame(frame.clone()));
        let terminal = self.check_terminal();
        if let Some(outcome) = terminal {
            self.outcome = Some(outcome);
            self.trace.push(TraceEvent::Terminal {
                t: frame.t,
                outcome,
            });
        }
        Some(StepReport {
            commands,
            fault,
            decision,
            frame,
            terminal,
        })
    }

    /// Runs to termination and scores the trace.
    pub fn run_to_end(mut self) -> Result<(Trace, EpisodeMetrics)> {
        while self.step().is_some() {}
        let metrics = compute_metrics(&self.trace)?;
        Ok((self.trace, metrics))
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }
}

/// Runs `scenario` under `policy` with `seed` and returns the trace with
/// metrics computed from it.
pub fn run_episode(scenario: &Scenario, policy: Policy, seed: u64) -> Result<(Trace, EpisodeMetrics)> {
    Episode::new(scenario, policy, seed)?.run_to_end()
}

/// Scenario, replay policy and seed that re-create a recorded episode: the
/// recorded policy outputs go back through the same validator and
/// simulator, and recorded commands are re-issued at their applied times so
/// memory matches.
pub fn replay_setup(trace: &Trace) -> Result<(Scenario, Policy, u64)> {
    let header = trace.header().ok_or_else(|| Error::TraceFormat {
        line: 1,
        reason: "trace has no header to replay from".into(),
    })?;
    let policy = Policy::replay(trace.decisions().map(|d| d.action));
    let mut scenario = header.scenario.clone();
    scenario.initial_command = None;
    scenario.commands = trace
        .commands()
        .map(|(t, text)| ScheduledCommand {
            t,
            text: text.to_string(),
        })
        .collect();
    Ok((scenario, policy, header.seed))
}

/// Re-runs a recorded episode; see [`replay_setup`].
pub fn replay_trace(trace: &Trace) -> Result<(Trace, EpisodeMetrics)> {
    let (scenario, policy, seed) = replay_setup(trace)?;
    Episode::new(&scenario, policy, seed)?.run_to_end()
}
