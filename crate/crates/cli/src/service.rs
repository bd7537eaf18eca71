//! Live mode. One thread owns the episode and advances it against the wall
//! clock; websocket clients only talk to it through a control queue, and
//! every outgoing message is serialized once and fanned out to all clients.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::mpsc::{self, RecvTimeoutError, TryRecvError};
use std::sync::{Arc, RwLock};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use anyhow::Context;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, mpsc as tmpsc};
use tracing::{info, warn};

use drivetalk::actions::Verdict;
use drivetalk::harness::{
    compute_metrics, partial_metrics, DecisionRecord, EpisodeMetrics, FrameRecord, PartialMetrics, StepReport,
};
use drivetalk::policies::{Fault, LlmEndpoint};
use drivetalk::sim::{ControlTarget, VehicleState};
use drivetalk::{Episode, MetaAction, Outcome, Policy, PolicyKind, RejectReason, Scenario};

/// Fan-out buffer per client. A client that falls further behind skips
/// ahead rather than stalling the simulation.
const BROADCAST_CAPACITY: usize = 4096;

/// What drives the ego in live mode.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Kind(PolicyKind),
    /// Recorded actions, replayed in order.
    Replay(Vec<MetaAction>),
}

impl PolicySpec {
    fn kind(&self) -> PolicyKind {
        match self {
            PolicySpec::Kind(k) => *k,
            PolicySpec::Replay(_) => PolicyKind::Replay,
        }
    }

    fn build(&self, scenario: &Scenario, endpoint: Option<&LlmEndpoint>) -> drivetalk::Result<Policy> {
        match self {
            PolicySpec::Kind(k) => Policy::from_kind(*k, scenario.rules, endpoint.cloned()),
            PolicySpec::Replay(actions) => Ok(Policy::replay(actions.iter().copied())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub scenario: Scenario,
    pub policy: PolicySpec,
    pub seed: u64,
    pub endpoint: Option<LlmEndpoint>,
    /// Simulated seconds per wall-clock second; 0 runs unpaced.
    pub pace: f64,
    /// Where finished episodes are written, one trace file each.
    pub trace_dir: Option<PathBuf>,
    pub start_paused: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSummary {
    pub t: f64,
    pub action: MetaAction,
    pub applied: MetaAction,
    pub verdict: Verdict,
}

impl From<&DecisionRecord> for DecisionSummary {
    fn from(d: &DecisionRecord) -> Self {
        Self {
            t: d.t,
            action: d.action,
            applied: d.applied,
            verdict: d.verdict,
        }
    }
}

/// Server to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    /// Sent on connect and after pause, resume and reset.
    Status {
        t: f64,
        scenario: String,
        policy: PolicyKind,
        seed: u64,
        paused: bool,
        outcome: Option<Outcome>,
    },
    Frame {
        t: f64,
        vehicles: Vec<VehicleState>,
        ego_target: ControlTarget,
        last_decision: Option<DecisionSummary>,
    },
    Decision {
        t: f64,
        thoughts: Option<String>,
        action: MetaAction,
        applied: MetaAction,
        verdict: Verdict,
        reason: Option<RejectReason>,
        fault: Option<Fault>,
    },
    MetricsPartial {
        metrics: PartialMetrics,
    },
    Terminal {
        t: f64,
        outcome: Outcome,
        metrics: Option<EpisodeMetrics>,
        trace: Option<PathBuf>,
    },
    CommandAck {
        text: String,
        t_applied: f64,
    },
    Error {
        message: String,
    },
}

/// Client to server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Command {
        text: String,
    },
    Pause,
    Resume,
    /// Restarts with the given scenario, policy or seed; omitted fields keep
    /// their current values.
    Reset {
        #[serde(default)]
        scenario: Option<String>,
        #[serde(default)]
        policy: Option<PolicyKind>,
        #[serde(default)]
        seed: Option<u64>,
    },
}

/// Read-only view served at `/state`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub scenario: String,
    pub policy: Option<PolicyKind>,
    pub seed: u64,
    pub paused: bool,
    pub outcome: Option<Outcome>,
    pub frame: Option<FrameRecord>,
    pub last_decision: Option<DecisionSummary>,
    pub metrics: Option<PartialMetrics>,
    pub commands: Vec<(f64, String)>,
}

type Reply = tmpsc::UnboundedSender<String>;

enum Control {
    Client(ClientMessage, Reply),
    Shutdown,
}

fn encode(msg: &ServerMessage) -> Arc<str> {
    serde_json::to_string(msg).expect("server messages serialize").into()
}

struct Sim {
    cfg: ServiceConfig,
    episode: Episode,
    paused: bool,
    events: broadcast::Sender<Arc<str>>,
    snapshot: Arc<RwLock<Snapshot>>,
    /// Wall-clock instant matching sim time `anchor_t`.
    anchor: Instant,
    anchor_t: f64,
    runs: u32,
}

impl Sim {
    fn new(cfg: ServiceConfig, events: broadcast::Sender<Arc<str>>, snapshot: Arc<RwLock<Snapshot>>) -> drivetalk::Result<Self> {
        let policy = cfg.policy.build(&cfg.scenario, cfg.endpoint.as_ref())?;
        let episode = Episode::new(&cfg.scenario, policy, cfg.seed)?;
        let mut sim = Sim {
            paused: cfg.start_paused,
            cfg,
            episode,
            events,
            snapshot,
            anchor: Instant::now(),
            anchor_t: 0.0,
            runs: 0,
        };
        sim.reset_snapshot();
        Ok(sim)
    }

    fn publish(&self, msg: &ServerMessage) {
        // No receivers is fine: nobody is watching yet.
        let _ = self.events.send(encode(msg));
    }

    fn status(&self) -> ServerMessage {
        ServerMessage::Status {
            t: self.episode.time(),
            scenario: self.cfg.scenario.name.clone(),
            policy: self.cfg.policy.kind(),
            seed: self.cfg.seed,
            paused: self.paused,
            outcome: self.episode.outcome(),
        }
    }

    fn reset_snapshot(&mut self) {
        let mut s = self.snapshot.write().expect("snapshot lock");
        *s = Snapshot {
            t: self.episode.time(),
            scenario: self.cfg.scenario.name.clone(),
            policy: Some(self.cfg.policy.kind()),
            seed: self.cfg.seed,
            paused: self.paused,
            ..Snapshot::default()
        };
    }

    fn rebase_clock(&mut self) {
        self.anchor = Instant::now();
        self.anchor_t = self.episode.time();
    }

    /// Returns false when the loop should stop.
    fn handle(&mut self, control: Control) -> bool {
        let (msg, reply) = match control {
            Control::Shutdown => return false,
            Control::Client(msg, reply) => (msg, reply),
        };
        let error = |text: String| {
            let _ = reply.send(encode(&ServerMessage::Error { message: text }).to_string());
        };
        match msg {
            ClientMessage::Command { text } => {
                if text.trim().is_empty() {
                    error("command text is empty".into());
                } else if self.episode.is_done() {
                    error("episode has ended; send reset to start another".into());
                } else {
                    info!(%text, "driver command queued");
                    self.episode.queue_command(text);
                }
            }
            ClientMessage::Pause => {
                self.paused = true;
                self.snapshot.write().expect("snapshot lock").paused = true;
                self.publish(&self.status());
            }
            ClientMessage::Resume => {
                self.paused = false;
                self.rebase_clock();
                self.snapshot.write().expect("snapshot lock").paused = false;
                self.publish(&self.status());
            }
            ClientMessage::Reset { scenario, policy, seed } => match self.restart(scenario, policy, seed) {
                Ok(()) => self.publish(&self.status()),
                Err(e) => error(format!("reset failed: {e}")),
            },
        }
        true
    }

    fn restart(&mut self, scenario: Option<String>, policy: Option<PolicyKind>, seed: Option<u64>) -> anyhow::Result<()> {
        let mut next = self.cfg.clone();
        if let Some(name) = scenario {
            next.scenario = Scenario::resolve(&name)?;
            next.scenario.hard_safety = true;
        }
        if let Some(kind) = policy {
            next.policy = PolicySpec::Kind(kind);
        }
        if let Some(seed) = seed {
            next.seed = seed;
        }
        let built = next.policy.build(&next.scenario, next.endpoint.as_ref())?;
        self.episode = Episode::new(&next.scenario, built, next.seed)?;
        self.cfg = next;
        self.runs += 1;
        self.rebase_clock();
        self.reset_snapshot();
        Ok(())
    }

    fn advance(&mut self) {
        let Some(report) = self.episode.step() else { return };
        let StepReport {
            commands,
            fault,
            decision,
            frame,
            terminal,
        } = report;
        for (t, text) in &commands {
            self.publish(&ServerMessage::CommandAck {
                text: text.clone(),
                t_applied: *t,
            });
        }
        if let Some(d) = &decision {
            self.publish(&ServerMessage::Decision {
                t: d.t,
                thoughts: d.thoughts.clone(),
                action: d.action,
                applied: d.applied,
                verdict: d.verdict,
                reason: d.reason,
                fault,
            });
        }
        let last = self.episode.last_decision().map(DecisionSummary::from);
        self.publish(&ServerMessage::Frame {
            t: frame.t,
            vehicles: frame.vehicles.clone(),
            ego_target: frame.ego_target,
            last_decision: last.clone(),
        });
        let partial = decision
            .is_some()
            .then(|| partial_metrics(&self.episode.trace().events).ok())
            .flatten();
        if let Some(metrics) = partial {
            self.publish(&ServerMessage::MetricsPartial { metrics });
        }
        {
            let mut s = self.snapshot.write().expect("snapshot lock");
            s.t = frame.t;
            s.frame = Some(frame.clone());
            s.last_decision = last;
            s.commands.extend(commands);
            if partial.is_some() {
                s.metrics = partial;
            }
            s.outcome = terminal;
        }
        if let Some(outcome) = terminal {
            self.finish(frame.t, outcome);
        }
    }

    fn finish(&mut self, t: f64, outcome: Outcome) {
        let trace = self.episode.trace();
        let metrics = compute_metrics(trace).ok();
        let path = self.cfg.trace_dir.as_ref().and_then(|dir| {
            let path = dir.join(format!(
                "live__{}__{}__{}__{}.jsonl",
                self.cfg.scenario.name,
                self.cfg.policy.kind(),
                self.cfg.seed,
                self.runs
            ));
            match trace.save(&path) {
                Ok(()) => Some(path),
                Err(e) => {
                    warn!(error = %e, "could not write live trace");
                    None
                }
            }
        });
        info!(%outcome, t, "live episode finished");
        self.publish(&ServerMessage::Terminal {
            t,
            outcome,
            metrics,
            trace: path,
        });
    }

    fn run(mut self, rx: mpsc::Receiver<Control>) {
        self.rebase_clock();
        loop {
            match rx.try_recv() {
                Ok(c) => {
                    if !self.handle(c) {
                        return;
                    }
                    continue;
                }
                Err(TryRecvError::Disconnected) => return,
                Err(TryRecvError::Empty) => {}
            }
            let wait = if self.paused || self.episode.is_done() {
                Some(Duration::from_millis(50))
            } else if self.cfg.pace > 0.0 {
                let next_t = self.episode.time() + self.cfg.scenario.sim.dt;
                let due = self.anchor + Duration::from_secs_f64((next_t - self.anchor_t) / self.cfg.pace);
                due.checked_duration_since(Instant::now())
            } else {
                None
            };
            if let Some(wait) = wait {
                match rx.recv_timeout(wait) {
                    Ok(c) => {
                        if !self.handle(c) {
                            return;
                        }
                        continue;
                    }
                    Err(RecvTimeoutError::Disconnected) => return,
                    Err(RecvTimeoutError::Timeout) => {}
                }
                if self.paused || self.episode.is_done() {
                    continue;
                }
            }
            self.advance();
        }
    }
}

/// Handle shared by every connection.
#[derive(Clone)]
pub struct AppState {
    control: mpsc::Sender<Control>,
    events: broadcast::Sender<Arc<str>>,
    snapshot: Arc<RwLock<Snapshot>>,
}

impl AppState {
    pub fn snapshot(&self) -> Snapshot {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn status(&self) -> ServerMessage {
        let s = self.snapshot();
        ServerMessage::Status {
            t: s.t,
            scenario: s.scenario,
            policy: s.policy.unwrap_or(PolicyKind::Replay),
            seed: s.seed,
            paused: s.paused,
            outcome: s.outcome,
        }
    }

    /// Stops the simulation thread after its current step.
    pub fn shutdown(&self) {
        let _ = self.control.send(Control::Shutdown);
    }
}

/// Builds the episode on a dedicated thread and starts advancing it. Live
/// mode always runs with the hard safety check on.
pub fn spawn_simulation(mut cfg: ServiceConfig) -> anyhow::Result<(AppState, JoinHandle<()>)> {
    cfg.scenario.hard_safety = true;
    let (events, _) = broadcast::channel(BROADCAST_CAPACITY);
    let snapshot = Arc::new(RwLock::new(Snapshot::default()));
    let (control, rx) = mpsc::channel();
    let (ready_tx, ready_rx) = mpsc::channel();
    let (ev, snap) = (events.clone(), snapshot.clone());
    let handle = thread::Builder::new()
        .name("simulation".into())
        .spawn(move || match Sim::new(cfg, ev, snap) {
            Ok(sim) => {
                let _ = ready_tx.send(Ok(()));
                sim.run(rx);
            }
            Err(e) => {
                let _ = ready_tx.send(Err(e));
            }
        })
        .context("spawning the simulation thread")?;
    ready_rx
        .recv()
        .context("simulation thread exited during start-up")?
        .context("starting the live episode")?;
    Ok((AppState { control, events, snapshot }, handle))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/state", get(state_snapshot))
        .with_state(state)
}

async fn state_snapshot(State(app): State<AppState>) -> Json<Snapshot> {
    Json(app.snapshot())
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(app): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client(socket, app))
}

fn parse_client(text: &str) -> Result<ClientMessage, String> {
    serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))
}

async fn client(socket: WebSocket, app: AppState) {
    let (mut sink, mut stream) = socket.split();
    let mut events = app.events.subscribe();
    let (reply_tx, mut reply_rx) = tmpsc::unbounded_channel::<String>();
    let hello = encode(&app.status()).to_string();

    let writer = async move {
        if sink.send(Message::Text(hello.into())).await.is_err() {
            return;
        }
        loop {
            let text: String = tokio::select! {
                ev = events.recv() => match ev {
                    Ok(m) => m.to_string(),
                    Err(broadcast::error::RecvError::Lagged(n)) => {
                        warn!(skipped = n, "client fell behind");
                        continue;
                    }
                    Err(broadcast::error::RecvError::Closed) => break,
                },
                r = reply_rx.recv() => match r {
                    Some(m) => m,
                    None => break,
                },
            };
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    };
    let control = app.control.clone();
    let reader = async move {
        while let Some(Ok(msg)) = stream.next().await {
            let text = match msg {
                Message::Text(t) => t.to_string(),
                Message::Close(_) => break,
                _ => continue,
            };
            let reply = match parse_client(&text) {
                Ok(m) => match control.send(Control::Client(m, reply_tx.clone())) {
                    Ok(()) => continue,
                    Err(_) => "simulation has stopped".to_string(),
                },
                Err(e) => e,
            };
            let _ = reply_tx.send(encode(&ServerMessage::Error { message: reply }).to_string());
        }
    };
    tokio::select! {
        _ = writer => {}
        _ = reader => {}
    }
}

/// Serves `/ws` and `/state` until Ctrl-C.
pub async fn serve(state: AppState, addr: SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    let local = listener.local_addr()?;
    eprintln!("serving ws://{local}/ws and http://{local}/state");
    let app = state.clone();
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    app.shutdown();
    Ok(())
}
