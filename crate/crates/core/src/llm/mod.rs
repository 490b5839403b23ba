//! Completion interface to the language model, with a scripted mock for
//! hermetic runs and an HTTP client for remote endpoints.

mod mock;
mod remote;
mod semaphore;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::extract_sql;

pub use mock::{MockBackend, ScriptEntry};
pub use remote::{RemoteBackend, RemoteConfig, Sleeper};
pub use semaphore::Semaphore;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("authentication failed: {0}")]
    AuthError(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("mock script exhausted after {consumed} responses")]
    ScriptExhausted { consumed: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub n: u32,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default)]
    pub stop: Vec<String>,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, n: u32) -> Self {
        Self {
            prompt: prompt.into(),
            n,
            temperature: 0.8,
            max_tokens: 512,
            stop: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.n == 0 {
            return Err(LlmError::InvalidRequest("n must be at least 1".into()));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be at least 1".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(LlmError::InvalidRequest("temperature must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub samples: Vec<String>,
    pub usage: Usage,
}

/// A model endpoint. `complete` returns exactly `req.n` samples on success.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError>;

    /// Requests callers may have outstanding at once. Backends whose
    /// answers depend on call order (the mock) keep this at 1.
    fn max_in_flight(&self) -> usize {
        1
    }
}

/// Runs `f` over `items` with at most `limit` in flight, returning results
/// in input order.
pub fn run_bounded<T, R, F>(items: &[T], limit: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let limit = limit.max(1);
    if limit == 1 {
        return items.iter().map(&f).collect();
    }
    let mut out = Vec::with_capacity(items.len());
    for chunk in items.chunks(limit) {
        let results: Vec<R> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|item| s.spawn(|| f(item))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker panicked"))
                .collect()
        });
        out.extend(results);
    }
    out
}

/// Samples `n` completions in one request and extracts a SQL string from
/// each. Samples without SQL become empty strings, which calibration drops.
pub fn sample_candidates(
    backend: &dyn CompletionBackend,
    request: &CompletionRequest,
) -> Result<Vec<String>, LlmError> {
    let resp = backend.complete(request)?;
    if resp.samples.len() != request.n as usize {
        return Err(LlmError::MalformedResponse(format!(
            "expected {} samples, got {}",
            request.n,
            resp.samples.len()
        )));
    }
    Ok(resp
        .samples
        .iter()
        .map(|s| extract_sql(s).unwrap_or_default())
        .collect())
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;

    #[test]
    fn candidates_from_mixed_samples() {
        let mock = MockBackend::new(vec![
            ScriptEntry::text("```sql\nSELECT a FROM t\n```"),
            ScriptEntry::text("I am not sure."),
            ScriptEntry::text("SQL: SELECT b FROM t"),
        ]);
        let got = sample_candidates(&mock, &CompletionRequest::new("q", 3)).unwrap();
        assert_eq!(got, ["SELECT a FROM t", "", "SELECT b FROM t"]);
        assert_eq!(mock.calls(), 1);
    }

    #[test]
    fn single_sample() {
        let mock = MockBackend::new(vec![ScriptEntry::text("SELECT 1")]);
        assert_eq!(sample_candidates(&mock, &CompletionRequest::new("q", 1)).unwrap(), ["SELECT 1"]);
    }

    #[test]
    fn request_validation() {
        let mut r = CompletionRequest::new("q", 0);
        assert!(r.validate().is_err());
        r.n = 1;
        r.max_tokens = 0;
        assert!(r.validate().is_err());
        r.max_tokens = 1;
        r.temperature = -1.0;
        assert!(r.validate().is_err());
    }

    #[test]
    fn bounded_runner_keeps_order_and_bound() {
        let live = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        let items: Vec<usize> = (0..23).collect();
        let out = run_bounded(&items, 4, |&i| {
            let now = live.fetch_add(1, Ordering::SeqCst) + 1;
            peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(std::time::Duration::from_millis(2));
            live.fetch_sub(1, Ordering::SeqCst);
            i * 2
        });
        assert_eq!(out, items.iter().map(|i| i * 2).collect::<Vec<_>>());
        assert!(peak.load(Ordering::SeqCst) <= 4);
    }
}
