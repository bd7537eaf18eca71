//! Local chat-completion stand-in used by the integration tests.
#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread;
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use drivetalk::policies::LlmEndpoint;

pub enum Reply {
    Text(String),
    Status(u16),
    /// Sleeps before answering, long enough to trip a client timeout.
    Stall(Duration, String),
}

type Script = dyn Fn(usize, &Value) -> Reply + Send + Sync;

#[derive(Clone)]
struct Shared {
    script: Arc<Script>,
    hits: Arc<AtomicUsize>,
    seen: Arc<Mutex<Vec<Seen>>>,
}

#[derive(Debug, Clone)]
pub struct Seen {
    pub body: Value,
    pub authorization: Option<String>,
}

pub struct Stub {
    pub addr: SocketAddr,
    hits: Arc<AtomicUsize>,
    seen: Arc<Mutex<Vec<Seen>>>,
}

impl Stub {
    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn seen(&self) -> Vec<Seen> {
        self.seen.lock().unwrap().clone()
    }

    /// Endpoint with no key, short timeouts and near-instant backoff.
    pub fn endpoint(&self) -> LlmEndpoint {
        LlmEndpoint {
            base_url: self.base_url(),
            model_name: "stub".into(),
            api_key_env: None,
            timeout: 2.0,
            max_retries: 3,
            backoff_base: 0.01,
            ..LlmEndpoint::default()
        }
    }
}

async fn completions(State(s): State<Shared>, headers: HeaderMap, Json(body): Json<Value>) -> Response {
    let n = s.hits.fetch_add(1, Ordering::SeqCst);
    s.seen.lock().unwrap().push(Seen {
        body: body.clone(),
        authorization: headers
            .get("authorization")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string),
    });
    let text = match (s.script)(n, &body) {
        Reply::Text(t) => t,
        Reply::Status(code) => {
            return (StatusCode::from_u16(code).unwrap(), "stub failure").into_response();
        }
        Reply::Stall(d, t) => {
            tokio::time::sleep(d).await;
            t
        }
    };
    Json(json!({
        "id": "stub",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
    }))
    .into_response()
}

/// Starts a server on its own thread and runtime; it lives until the test
/// process exits. `script` sees the 0-based request number and the body.
pub fn serve(script: impl Fn(usize, &Value) -> Reply + Send + Sync + 'static) -> Stub {
    let shared = Shared {
        script: Arc::new(script),
        hits: Arc::new(AtomicUsize::new(0)),
        seen: Arc::new(Mutex::new(Vec::new())),
    };
    let (hits, seen) = (shared.hits.clone(), shared.seen.clone());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            let app = Router::new()
                .route("/v1/chat/completions", post(completions))
                .with_state(shared);
            axum::serve(listener, app).await.unwrap();
        });
    });
    let addr = rx.recv_timeout(Duration::from_secs(5)).expect("stub server started");
    Stub { addr, hits, seen }
}

/// The live observation is the last user turn of the request.
pub fn observation(body: &Value) -> String {
    body["messages"]
        .as_array()
        .and_then(|m| m.iter().rev().find(|m| m["role"] == "user"))
        .and_then(|m| m["content"].as_str())
        .unwrap_or_default()
        .to_string()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Neighbor {
    pub gap: f64,
    pub rel: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LaneObs {
    pub lane: i32,
    pub lead: Option<Neighbor>,
    pub follower: Option<Neighbor>,
    pub alongside: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Obs {
    pub lane: i32,
    pub speed: f64,
    pub target_lane: i32,
    pub home: Option<i32>,
    pub limit: f64,
    pub lanes: Vec<LaneObs>,
}

impl Obs {
    pub fn lane(&self, lane: i32) -> Option<&LaneObs> {
        self.lanes.iter().find(|l| l.lane == lane)
    }
}

fn number_after(s: &str, key: &str) -> Option<f64> {
    let rest = &s[s.find(key)? + key.len()..];
    let end = rest
        .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == '-'))
        .unwrap_or(rest.len());
    rest[..end].parse().ok()
}

/// Reads back the observation format a model would see.
pub fn parse_observation(text: &str) -> Obs {
    let mut o = Obs::default();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("Ego: ") {
            o.lane = number_after(rest, "lane ").unwrap_or(0.0) as i32;
            o.speed = number_after(rest, "speed ").unwrap_or(0.0);
            o.target_lane = number_after(rest, "toward lane ").unwrap_or(o.lane as f64) as i32;
        } else if line.starts_with("Home lane: lane ") {
            o.home = number_after(line, "Home lane: lane ").map(|v| v as i32);
        } else if line.starts_with("Speed limit: ") {
            o.limit = number_after(line, "Speed limit: ").unwrap_or(0.0);
        } else if let Some(rest) = line.strip_prefix("lane ") {
            let Some(lane) = number_after(line, "lane ").map(|v| v as i32) else { continue };
            if o.lanes.last().map(|l| l.lane) != Some(lane) {
                o.lanes.push(LaneObs { lane, ..LaneObs::default() });
            }
            let entry = o.lanes.last_mut().unwrap();
            let n = number_after(rest, "gap ").map(|gap| Neighbor {
                gap,
                rel: number_after(rest, "relative speed ").unwrap_or(0.0),
            });
            if rest.contains(" lead:") {
                entry.lead = n;
            } else if rest.contains(" follower:") {
                entry.follower = n;
            } else if rest.contains(" alongside:") {
                entry.alongside = true;
            }
        }
    }
    o
}

/// A cautious scripted driver written the way a chain-of-thought answer
/// reads: pass a slow leader on the left when the lane is open, otherwise
/// slow down, then return home.
pub fn cot_driver(text: &str) -> String {
    let o = parse_observation(text);
    let open = |l: &LaneObs, ahead: f64| {
        !l.alongside
            && l.lead.is_none_or(|n| n.gap > ahead)
            && l.follower.is_none_or(|n| n.gap > 20.0 && n.gap + 3.0 * n.rel.min(0.0) > 15.0)
    };
    let own = o.lane(o.lane).and_then(|l| l.lead);
    let (thought, action) = if o.target_lane != o.lane {
        ("A lane change is still in progress, so I hold my set-point.".to_string(), 1)
    } else if let Some(lead) = own.filter(|n| n.gap < 45.0 && n.rel < 0.0) {
        match o.lane(o.lane + 1) {
            Some(left) if open(left, lead.gap + 20.0) => (
                format!(
                    "The vehicle ahead is {:.1} m away and closing. Lane {} is clear, so I overtake on the left.",
                    lead.gap,
                    o.lane + 1
                ),
                0,
            ),
            _ => (
                format!("The vehicle ahead is {:.1} m away and the left lane is not clear, so I slow down.", lead.gap),
                4,
            ),
        }
    } else if o.home.is_some_and(|h| h < o.lane) && o.lane(o.lane - 1).is_some_and(|r| open(r, 30.0)) {
        ("I have passed and the lane to my right is clear, so I return toward my home lane.".to_string(), 2)
    } else if o.speed < o.limit - 1.0 && own.is_none_or(|n| n.gap > 60.0) {
        ("The road ahead is open and I am below the limit, so I speed up.".to_string(), 3)
    } else {
        ("Nothing requires a change; I keep lane and speed.".to_string(), 1)
    };
    format!("{thought}\nAction: {action}")
}
