//! Minimal chat-completion client with bounded exponential-backoff retries.

use std::env;
use std::thread;
use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tracing::{debug, warn};

use crate::prompting::PromptBundle;

pub const ENV_BASE_URL: &str = "DRIVETALK_LLM_BASE_URL";
pub const ENV_MODEL: &str = "DRIVETALK_LLM_MODEL";
pub const ENV_KEY_VAR: &str = "DRIVETALK_LLM_KEY_VAR";
pub const DEFAULT_KEY_VAR: &str = "OPENAI_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmEndpoint {
    /// Base URL up to and including the API version, e.g. `https://host/v1`.
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the bearer token. `None`
    /// sends no authorization header.
    pub api_key_env: Option<String>,
    /// Per-attempt timeout in seconds.
    pub timeout: f64,
    pub max_retries: u32,
    pub temperature: f64,
    pub seed: Option<u64>,
    /// First retry delay in seconds; doubles on every further retry.
    pub backoff_base: f64,
}

impl Default for LlmEndpoint {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".to_string(),
            model_name: "gpt-4".to_string(),
            api_key_env: Some(DEFAULT_KEY_VAR.to_string()),
            timeout: 30.0,
            max_retries: 3,
            temperature: 0.0,
            seed: Some(0),
            backoff_base: 0.5,
        }
    }
}

impl LlmEndpoint {
    /// Defaults overridden by `DRIVETALK_LLM_BASE_URL`, `DRIVETALK_LLM_MODEL`
    /// and `DRIVETALK_LLM_KEY_VAR`.
    pub fn from_env() -> Self {
        let mut e = Self::default();
        if let Ok(url) = env::var(ENV_BASE_URL) {
            e.base_url = url;
        }
        if let Ok(model) = env::var(ENV_MODEL) {
            e.model_name = model;
        }
        if let Ok(var) = env::var(ENV_KEY_VAR) {
            e.api_key_env = (!var.is_empty()).then_some(var);
        }
        e
    }

    pub fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    /// Delay before retry number `retry` (0-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        Duration::from_secs_f64(self.backoff_base * 2f64.powi(retry as i32))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("API key variable `{0}` is not set")]
    MissingKey(String),
    #[error("endpoint rejected credentials (HTTP {status})")]
    Auth { status: u16 },
    #[error("timed out on all {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("server error HTTP {status} after {attempts} attempts")]
    Server { status: u16, attempts: u32 },
    #[error("request failed with HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { message: String, attempts: u32 },
    #[error("malformed response body: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmReply {
    pub text: String,
    pub retries: u32,
    pub latency: Duration,
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: AssistantMessage,
}

#[derive(Deserialize)]
struct AssistantMessage {
    content: Option<String>,
}

enum Attempt {
    Done(String),
    Retry(LlmError),
    Fatal(LlmError),
}

pub struct LlmClient {
    endpoint: LlmEndpoint,
    http: Client,
}

impl LlmClient {
    pub fn new(endpoint: LlmEndpoint) -> Result<Self, LlmError> {
        let http = Client::builder()
            .timeout(Duration::from_secs_f64(endpoint.timeout))
            .build()
            .map_err(|e| LlmError::Transport {
                message: e.to_string(),
                attempts: 0,
            })?;
        Ok(Self { endpoint, http })
    }

    pub fn endpoint(&self) -> &LlmEndpoint {
        &self.endpoint
    }

    fn api_key(&self) -> Result<Option<String>, LlmError> {
        match &self.endpoint.api_key_env {
            None => Ok(None),
            Some(var) => env::var(var).map(Some).map_err(|_| LlmError::MissingKey(var.clone())),
        }
    }

    pub fn request_body(&self, bundle: &PromptBundle) -> serde_json::Value {
        let mut body = json!({
            "model": self.endpoint.model_name,
            "messages": bundle.messages(),
            "temperature": self.endpoint.temperature,
        });
        if let Some(seed) = self.endpoint.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn attempt(&self, body: &serde_json::Value, key: Option<&str>, attempts: u32) -> Attempt {
        let mut req = self.http.post(self.endpoint.completions_url()).json(body);
        if let Some(k) = key {
            req = req.bearer_auth(k);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retry(LlmError::Timeout { attempts }),
            Err(e) => {
                return Attempt::Retry(LlmError::Transport {
                    message: e.to_string(),
                    attempts,
                })
            }
        };
        let status = resp.status();
        if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
            return Attempt::Fatal(LlmError::Auth { status: status.as_u16() });
        }
        if status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS {
            return Attempt::Retry(LlmError::Server {
                status: status.as_u16(),
                attempts,
            });
        }
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) if e.is_timeout() => return Attempt::Retry(LlmError::Timeout { attempts }),
            Err(e) => return Attempt::Fatal(LlmError::Malformed(e.to_string())),
        };
        if !status.is_success() {
            return Attempt::Fatal(LlmError::Http {
                status: status.as_u16(),
                body: text,
            });
        }
        match serde_json::from_str::<CompletionBody>(&text) {
            Ok(b) => match b.choices.into_iter().next().and_then(|c| c.message.content) {
                Some(content) => Attempt::Done(content),
                None => Attempt::Fatal(LlmError::Malformed("no assistant content in choices".into())),
            },
            Err(e) => Attempt::Fatal(LlmError::Malformed(e.to_string())),
        }
    }

    /// Sends the prompt and returns the assistant text. Timeouts, transport
    /// failures, 429 and 5xx are retried up to `max_retries` times.
    pub fn chat(&self, bundle: &PromptBundle) -> Result<LlmReply, LlmError> {
        let key = self.api_key()?;
        let body = self.request_body(bundle);
        let started = Instant::now();
        let mut retries = 0;
        loop {
            match self.attempt(&body, key.as_deref(), retries + 1) {
                Attempt::Done(text) => {
                    debug!(retries, "chat completion succeeded");
                    return Ok(LlmReply {
                        text,
                        retries,
                        latency: started.elapsed(),
                    });
                }
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e) if retries >= self.endpoint.max_retries => return Err(e),
                Attempt::Retry(e) => {
                    let delay = self.endpoint.backoff(retries);
                    warn!(error = %e, ?delay, "retrying chat completion");
                    thread::sleep(delay);
                    retries += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_from_half_a_second() {
        let e = LlmEndpoint::default();
        assert_eq!(e.backoff(0), Duration::from_millis(500));
        assert_eq!(e.backoff(1), Duration::from_secs(1));
        assert_eq!(e.backoff(2), Duration::from_secs(2));
    }

    #[test]
    fn url_joins_cleanly() {
        let e = LlmEndpoint {
            base_url: "http://localhost:9/v1/".into(),
            ..LlmEndpoint::default()
        };
        assert_eq!(e.completions_url(), "http://localhost:9/v1/chat/completions");
    }

    #[test]
    fn missing_key_is_reported_before_any_request() {
        let client = LlmClient::new(LlmEndpoint {
            base_url: "http://127.0.0.1:1".into(),
            api_key_env: Some("DRIVETALK_TEST_KEY_THAT_IS_NOT_SET".into()),
            ..LlmEndpoint::default()
        })
        .unwrap();
        let bundle = crate::prompting::build_prompt(
            crate::prompting::PromptMode::Standard,
            &crate::prompting::FewShotStore::builtin(),
            "obs",
            None,
        )
        .unwrap();
        assert_eq!(
            client.chat(&bundle),
            Err(LlmError::MissingKey("DRIVETALK_TEST_KEY_THAT_IS_NOT_SET".into()))
        );
        let body = client.request_body(&bundle);
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["seed"], 0);
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"].as_array().unwrap().len(), 10);
    }
}
