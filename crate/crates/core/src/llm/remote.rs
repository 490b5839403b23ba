//! HTTP completion client.
//!
//! Request body `{model, prompt, n, temperature, max_tokens, stop}`;
//! response `{samples: [{text}], usage}`. The API key is read from the
//! environment variable named in the config and sent as a bearer token.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::semaphore::Semaphore;
use super::{CompletionBackend, CompletionRequest, CompletionResponse, LlmError, Usage};
use crate::http::{Transport, TransportErrorKind, UreqTransport};

pub type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub max_in_flight: usize,
    /// Total attempts per request, the first included.
    pub retry_cap: u32,
    pub timeout_secs: u64,
    pub backoff_base_ms: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: "default".into(),
            api_key_env: "FINSQL_API_KEY".into(),
            max_in_flight: 4,
            retry_cap: 3,
            timeout_secs: 60,
            backoff_base_ms: 500,
        }
    }
}

impl RemoteConfig {
    /// Delay before retry number `attempt` (1-based): base · 2^(attempt-1).
    pub fn backoff(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.backoff_base_ms.saturating_mul(1u64 << (attempt - 1).min(20)))
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    n: u32,
    temperature: f64,
    max_tokens: u32,
    stop: &'a [String],
}

#[derive(Deserialize)]
struct WireSample {
    text: String,
}

#[derive(Deserialize)]
struct WireResponse {
    samples: Vec<WireSample>,
    #[serde(default)]
    usage: Usage,
}

pub struct RemoteBackend {
    config: RemoteConfig,
    transport: Arc<dyn Transport>,
    sleeper: Sleeper,
    slots: Semaphore,
}

enum Attempt {
    Done(Result<CompletionResponse, LlmError>),
    Retry(LlmError),
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        Self::with_transport(config, Arc::new(UreqTransport), Arc::new(std::thread::sleep))
    }

    pub fn with_transport(config: RemoteConfig, transport: Arc<dyn Transport>, sleeper: Sleeper) -> Self {
        let slots = Semaphore::new(config.max_in_flight);
        Self {
            config,
            transport,
            sleeper,
            slots,
        }
    }

    fn attempt(&self, body: &str, headers: &[(String, String)], req: &CompletionRequest, n: u32) -> Attempt {
        let timeout = Duration::from_secs(self.config.timeout_secs);
        let reply = {
            let _permit = self.slots.acquire();
            self.transport.post_json(&self.config.endpoint, headers, body, timeout)
        };
        let reply = match reply {
            Ok(r) => r,
            Err(e) => {
                return Attempt::Retry(match e.kind {
                    TransportErrorKind::Timeout => LlmError::Timeout { attempts: n },
                    _ => LlmError::Transport(e.message),
                })
            }
        };
        match reply.status {
            200..=299 => {}
            401 | 403 => return Attempt::Done(Err(LlmError::AuthError(format!("HTTP {}", reply.status)))),
            429 => return Attempt::Retry(LlmError::RateLimited { attempts: n }),
            500..=599 => return Attempt::Retry(LlmError::Transport(format!("HTTP {}", reply.status))),
            s => return Attempt::Done(Err(LlmError::Transport(format!("HTTP {s}")))),
        }
        let parsed: WireResponse = match serde_json::from_str(&reply.body) {
            Ok(p) => p,
            Err(e) => return Attempt::Done(Err(LlmError::MalformedResponse(e.to_string()))),
        };
        if parsed.samples.len() != req.n as usize {
            return Attempt::Done(Err(LlmError::MalformedResponse(format!(
                "expected {} samples, got {}",
                req.n,
                parsed.samples.len()
            ))));
        }
        Attempt::Done(Ok(CompletionResponse {
            samples: parsed.samples.into_iter().map(|s| s.text).collect(),
            usage: parsed.usage,
        }))
    }
}

impl CompletionBackend for RemoteBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        req.validate()?;
        let key = std::env::var(&self.config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| {
                LlmError::AuthError(format!("environment variable {} is not set", self.config.api_key_env))
            })?;
        let headers = vec![("Authorization".to_string(), format!("Bearer {key}"))];
        let body = serde_json::to_string(&WireRequest {
            model: &self.config.model,
            prompt: &req.prompt,
            n: req.n,
            temperature: req.temperature,
            max_tokens: req.max_tokens,
            stop: &req.stop,
        })
        .map_err(|e| LlmError::InvalidRequest(e.to_string()))?;

        let cap = self.config.retry_cap.max(1);
        let mut attempt = 1;
        loop {
            match self.attempt(&body, &headers, req, attempt) {
                Attempt::Done(result) => return result,
                Attempt::Retry(err) if attempt >= cap => return Err(err),
                Attempt::Retry(err) => {
                    tracing::debug!(attempt, %err, "retrying completion request");
                    (self.sleeper)(self.config.backoff(attempt));
                    attempt += 1;
                }
            }
        }
    }

    fn max_in_flight(&self) -> usize {
        self.config.max_in_flight.max(1)
    }
}
