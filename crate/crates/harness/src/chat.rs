//! Blocking client for OpenAI-compatible chat-completion endpoints.

use std::time::Duration;

use loopsmith_core::backends::AgentBackend;
use loopsmith_core::context::AgentContext;
use loopsmith_core::prompt::Prompt;
use loopsmith_core::Error;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatEndpointConfig {
    /// Everything before `/chat/completions`, e.g. `https://api.openai.com/v1`.
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub temperature: f64,
    /// First backoff delay; doubles on every retry.
    #[serde(default = "default_backoff")]
    pub backoff_base_s: f64,
}

fn default_timeout() -> f64 {
    120.0
}
fn default_retries() -> u32 {
    4
}
fn default_backoff() -> f64 {
    1.0
}

impl ChatEndpointConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return Err(Error::Config("endpoint timeout_s must be positive".into()));
        }
        if !(self.backoff_base_s >= 0.0 && self.backoff_base_s.is_finite()) {
            return Err(Error::Config("endpoint backoff_base_s must be >= 0".into()));
        }
        if self.base_url.trim().is_empty() || self.model.trim().is_empty() {
            return Err(Error::Config("endpoint needs base_url and model".into()));
        }
        Ok(())
    }

    pub fn url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

pub struct ChatClient {
    cfg: ChatEndpointConfig,
    key: String,
    agent: ureq::Agent,
    sleep: fn(Duration),
}

enum Attempt {
    Done(String),
    Retry(String),
    Fail(Error),
}

impl ChatClient {
    /// Reads the key from the environment; no request is made.
    pub fn new(cfg: ChatEndpointConfig) -> Result<Self, Error> {
        cfg.validate()?;
        let key = std::env::var(&cfg.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| Error::Config(format!("environment variable {} is not set", cfg.api_key_env)))?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(ChatClient { cfg, key, agent, sleep: std::thread::sleep })
    }

    /// Replaces the function used to wait between retries.
    pub fn with_sleeper(mut self, sleep: fn(Duration)) -> Self {
        self.sleep = sleep;
        self
    }

    pub fn config(&self) -> &ChatEndpointConfig {
        &self.cfg
    }

    pub fn request_body(&self, system: &str, user: &str) -> Value {
        json!({
            "model": self.cfg.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": self.cfg.temperature,
        })
    }

    /// Content of the first choice. Retries 429, 5xx and network failures.
    pub fn complete(&self, system: &str, user: &str) -> Result<String, Error> {
        let body = self.request_body(system, user);
        let mut last = String::new();
        for attempt in 0..=self.cfg.max_retries {
            if attempt > 0 {
                (self.sleep)(self.backoff(attempt));
            }
            match self.attempt(&body) {
                Attempt::Done(s) => return Ok(s),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(why) => {
                    log::warn!("{} attempt {} failed: {why}", self.cfg.model, attempt + 1);
                    last = why;
                }
            }
        }
        Err(Error::Transport(format!("{} retries exhausted; last failure: {last}", self.cfg.max_retries)))
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let base = self.cfg.backoff_base_s * 2f64.powi(attempt as i32 - 1);
        let jitter = rand::rng().random_range(0.5..=1.0);
        Duration::from_secs_f64(base * jitter)
    }

    fn attempt(&self, body: &Value) -> Attempt {
        let sent = self
            .agent
            .post(&self.cfg.url())
            .header("Authorization", &format!("Bearer {}", self.key))
            .header("Content-Type", "application/json")
            .send(body.to_string().as_bytes());
        let mut resp = match sent {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(format!("reading body: {e}")),
        };
        if status == 429 || status >= 500 {
            return Attempt::Retry(format!("HTTP {status}"));
        }
        if status >= 400 {
            return Attempt::Fail(Error::Transport(format!("HTTP {status}: {}", snippet(&text))));
        }
        let v: Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(_) => return Attempt::Fail(Error::Parse(format!("response body is not JSON: {}", snippet(&text)))),
        };
        match v.pointer("/choices/0/message/content").and_then(Value::as_str) {
            Some(c) => Attempt::Done(c.to_string()),
            None => Attempt::Fail(Error::Schema("response has no choices[0].message.content".into())),
        }
    }
}

fn snippet(s: &str) -> String {
    s.chars().take(200).collect()
}

/// Agent backend that forwards rendered prompts to a chat endpoint.
pub struct LiveBackend {
    client: ChatClient,
}

impl LiveBackend {
    pub fn new(client: ChatClient) -> Self {
        LiveBackend { client }
    }
}

impl AgentBackend for LiveBackend {
    fn respond(&mut self, _ctx: &AgentContext, prompt: &Prompt) -> Result<String, Error> {
        self.client.complete(&prompt.system, &prompt.user)
    }
}
