use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{CompletionBackend, CompletionRequest, CompletionResponse, LlmError, Usage};

/// One scripted sample: a response text, or `{"error": kind}` with kind one
/// of `timeout`, `rate_limited`, `auth`, `transport`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptEntry {
    Text(String),
    Error { error: String },
}

impl ScriptEntry {
    pub fn text(s: &str) -> Self {
        Self::Text(s.to_string())
    }

    pub fn error(kind: &str) -> Self {
        Self::Error {
            error: kind.to_string(),
        }
    }

    fn to_error(kind: &str) -> LlmError {
        match kind {
            "timeout" => LlmError::Timeout { attempts: 1 },
            "rate_limited" => LlmError::RateLimited { attempts: 1 },
            "auth" => LlmError::AuthError("scripted".into()),
            other => LlmError::Transport(format!("scripted {other} failure")),
        }
    }
}

/// Serves script entries in order, one per requested sample.
#[derive(Debug)]
pub struct MockBackend {
    script: Vec<ScriptEntry>,
    cursor: Mutex<usize>,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(script: Vec<ScriptEntry>) -> Self {
        Self {
            script,
            cursor: Mutex::new(0),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Self::new(serde_json::from_str(text)?))
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(std::io::Error::other)
    }

    /// Number of `complete` calls so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn remaining(&self) -> usize {
        self.script.len() - *self.cursor.lock().expect("mock lock")
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        req.validate()?;
        let mut cursor = self.cursor.lock().expect("mock lock");
        let mut samples = Vec::with_capacity(req.n as usize);
        for _ in 0..req.n {
            let entry = self
                .script
                .get(*cursor)
                .ok_or(LlmError::ScriptExhausted { consumed: *cursor })?;
            *cursor += 1;
            match entry {
                ScriptEntry::Text(t) => samples.push(t.clone()),
                ScriptEntry::Error { error } => return Err(ScriptEntry::to_error(error)),
            }
        }
        let usage = Usage {
            prompt_tokens: req.prompt.split_whitespace().count() as u64,
            completion_tokens: samples.iter().map(|s| s.split_whitespace().count() as u64).sum(),
        };
        Ok(CompletionResponse { samples, usage })
    }
}
