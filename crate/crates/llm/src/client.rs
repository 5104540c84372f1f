//! Chat-completion transport with bounded retries.

use std::io::Read;
use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

use crate::prompt::Prompt;

pub const API_KEY_ENV: &str = "CEDGEN_LLM_API_KEY";
pub const ENDPOINT_ENV: &str = "CEDGEN_LLM_ENDPOINT";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("request timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connection(String),
    #[error("unexpected response: {0}")]
    Protocol(String),
}

impl TransportError {
    /// Rate limits, server errors, timeouts and connection failures are
    /// worth another attempt.
    pub fn is_retryable(&self) -> bool {
        match self {
            TransportError::Status { status, .. } => *status == 429 || *status >= 500,
            TransportError::Timeout | TransportError::Connection(_) => true,
            TransportError::Protocol(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    /// Requests sent, including the successful one.
    pub attempts: u32,
}

/// A failed request together with how many attempts were made.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{error} (after {attempts} attempts)")]
pub struct RequestFailure {
    pub error: TransportError,
    pub attempts: u32,
}

pub trait ChatClient: Sync {
    fn complete(&self, prompt: &Prompt) -> Result<Completion, RequestFailure>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 4,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `n` (0-based): base * 2^n, capped.
    pub fn delay(&self, n: u32) -> Duration {
        let factor = 1u32.checked_shl(n.min(20)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }

    /// Runs `attempt` until it succeeds, fails permanently or the retry
    /// budget is spent.
    pub fn run(
        &self,
        mut attempt: impl FnMut() -> Result<String, TransportError>,
    ) -> Result<Completion, RequestFailure> {
        let mut n = 0;
        loop {
            match attempt() {
                Ok(text) => {
                    return Ok(Completion {
                        text,
                        attempts: n + 1,
                    })
                }
                Err(e) if e.is_retryable() && n < self.max_retries => {
                    std::thread::sleep(self.delay(n));
                    n += 1;
                }
                Err(error) => {
                    return Err(RequestFailure {
                        error,
                        attempts: n + 1,
                    })
                }
            }
        }
    }
}

/// Provider-specific request and response shapes.
pub trait ProviderAdapter: Send + Sync {
    fn request_body(&self, model: &str, prompt: &Prompt) -> Value;
    fn auth_header(&self, api_key: &str) -> (String, String);
    fn response_text(&self, body: &Value) -> Option<String>;
}

/// The widely implemented `/chat/completions` JSON shape.
#[derive(Debug, Clone, Copy, Default)]
pub struct OpenAiCompatible;

impl ProviderAdapter for OpenAiCompatible {
    fn request_body(&self, model: &str, prompt: &Prompt) -> Value {
        json!({
            "model": model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
        })
    }

    fn auth_header(&self, api_key: &str) -> (String, String) {
        ("Authorization".into(), format!("Bearer {api_key}"))
    }

    fn response_text(&self, body: &Value) -> Option<String> {
        body.pointer("/choices/0/message/content")?
            .as_str()
            .map(str::to_string)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmRunConfig {
    pub endpoint: String,
    pub model: String,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    pub concurrency: usize,
    pub api_key: Option<String>,
}

impl LlmRunConfig {
    /// Endpoint and key from the environment, other fields defaulted.
    pub fn from_env(model: impl Into<String>) -> Self {
        LlmRunConfig {
            endpoint: std::env::var(ENDPOINT_ENV).unwrap_or_else(|_| DEFAULT_ENDPOINT.to_string()),
            model: model.into(),
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
            concurrency: 4,
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
        }
    }
}

pub struct HttpChatClient {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    adapter: Box<dyn ProviderAdapter>,
}

impl HttpChatClient {
    pub fn new(cfg: &LlmRunConfig) -> Self {
        Self::with_adapter(cfg, Box::new(OpenAiCompatible))
    }

    pub fn with_adapter(cfg: &LlmRunConfig, adapter: Box<dyn ProviderAdapter>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpChatClient {
            agent,
            endpoint: cfg.endpoint.clone(),
            model: cfg.model.clone(),
            api_key: cfg.api_key.clone(),
            retry: cfg.retry,
            adapter,
        }
    }

    fn send_once(&self, body: &str) -> Result<String, TransportError> {
        let mut req = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            let (name, value) = self.adapter.auth_header(key);
            req = req.header(name, value);
        }
        let resp = req.send(body).map_err(map_ureq)?;
        let status = resp.status().as_u16();
        let mut text = String::new();
        resp.into_body()
            .into_reader()
            .read_to_string(&mut text)
            .map_err(|e| TransportError::Connection(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(TransportError::Status { status, body: text });
        }
        let json: Value =
            serde_json::from_str(&text).map_err(|e| TransportError::Protocol(e.to_string()))?;
        self.adapter
            .response_text(&json)
            .ok_or_else(|| TransportError::Protocol("response has no message content".into()))
    }
}

fn map_ureq(e: ureq::Error) -> TransportError {
    match e {
        ureq::Error::Timeout(_) => TransportError::Timeout,
        ureq::Error::StatusCode(status) => TransportError::Status {
            status,
            body: String::new(),
        },
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => TransportError::Timeout,
        other => TransportError::Connection(other.to_string()),
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, prompt: &Prompt) -> Result<Completion, RequestFailure> {
        let body = self.adapter.request_body(&self.model, prompt).to_string();
        self.retry.run(|| self.send_once(&body))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_is_bounded() {
        let p = RetryPolicy {
            max_retries: 10,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_secs(1),
        };
        assert_eq!(p.delay(0), Duration::from_millis(100));
        assert_eq!(p.delay(3), Duration::from_millis(800));
        assert_eq!(p.delay(4), Duration::from_secs(1));
        assert_eq!(p.delay(40), Duration::from_secs(1));
    }

    #[test]
    fn retries_stop_on_permanent_errors() {
        let p = RetryPolicy {
            max_retries: 3,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        };
        let mut calls = 0;
        let r = p.run(|| {
            calls += 1;
            Err(TransportError::Status {
                status: 400,
                body: String::new(),
            })
        });
        assert_eq!(calls, 1);
        assert_eq!(r.unwrap_err().attempts, 1);
        let mut calls = 0;
        let r = p.run(|| {
            calls += 1;
            Err(TransportError::Timeout)
        });
        assert_eq!(calls, 4);
        assert_eq!(r.unwrap_err().error, TransportError::Timeout);
    }

    #[test]
    fn adapter_shapes() {
        let a = OpenAiCompatible;
        let p = Prompt {
            system: "s".into(),
            user: "u".into(),
        };
        let body = a.request_body("m", &p);
        assert_eq!(body["messages"][1]["content"], "u");
        let resp = json!({"choices": [{"message": {"content": "0,1"}}]});
        assert_eq!(a.response_text(&resp).as_deref(), Some("0,1"));
    }
}
