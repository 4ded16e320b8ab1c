//! Completion backends: the scripted mock used by tests and offline runs,
//! and the remote HTTPS completion endpoint.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::gateway::{canonical_request_hash, CompletionRequest};

pub trait Backend: Send + Sync {
    fn id(&self) -> &str;
    /// Produce exactly `request.n_samples` completions.
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>>;
    fn call_count(&self) -> u64;
}

#[derive(Debug, Clone)]
pub enum PromptMatcher {
    /// Matches a specific canonical request hash.
    Hash(String),
    PromptEquals(String),
    PromptContains(String),
    PromptEndsWith(String),
    Any,
}

impl PromptMatcher {
    fn matches(&self, request: &CompletionRequest) -> bool {
        match self {
            PromptMatcher::Hash(h) => canonical_request_hash(request) == *h,
            PromptMatcher::PromptEquals(p) => request.prompt == *p,
            PromptMatcher::PromptContains(p) => request.prompt.contains(p),
            PromptMatcher::PromptEndsWith(p) => request.prompt.ends_with(p),
            PromptMatcher::Any => true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MockRule {
    pub matcher: PromptMatcher,
    pub completions: Vec<String>,
}

impl MockRule {
    pub fn new(matcher: PromptMatcher, completions: Vec<String>) -> Self {
        MockRule {
            matcher,
            completions,
        }
    }
}

/// Scripted backend. Rules are checked in order; the first match answers.
/// A rule with a single completion is repeated to satisfy `n_samples`; a
/// rule with several completions is returned as-is (letting tests exercise
/// the protocol check).
#[derive(Default)]
pub struct MockBackend {
    rules: Vec<MockRule>,
    calls: AtomicU64,
    failures_remaining: Mutex<u64>,
    strict: Option<Vec<String>>,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rule(mut self, rule: MockRule) -> Self {
        self.rules.push(rule);
        self
    }

    /// Fail the first `n` calls with a transport-style error.
    pub fn failing_first(self, n: u64) -> Self {
        *self.failures_remaining.lock().unwrap() = n;
        self
    }

    /// A backend that always returns this exact completion list, ignoring
    /// `n_samples`.
    pub fn strict_samples(completions: Vec<String>) -> Self {
        MockBackend {
            strict: Some(completions),
            ..Default::default()
        }
    }
}

impl Backend for MockBackend {
    fn id(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        {
            let mut remaining = self.failures_remaining.lock().unwrap();
            if *remaining > 0 {
                *remaining -= 1;
                return Err(Error::Other("mock transport failure".into()));
            }
        }
        if let Some(strict) = &self.strict {
            return Ok(strict.clone());
        }
        for rule in &self.rules {
            if rule.matcher.matches(request) {
                let n = request.n_samples as usize;
                return Ok(if rule.completions.len() == 1 {
                    vec![rule.completions[0].clone(); n]
                } else {
                    rule.completions.clone()
                });
            }
        }
        Err(Error::Other(format!(
            "mock has no rule for prompt starting {:?}",
            request.prompt.chars().take(40).collect::<String>()
        )))
    }

    fn call_count(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

/// Remote HTTPS completion endpoint speaking the common completions shape:
/// request `{prompt, max_tokens, temperature, top_p, n, stop, model}`,
/// response `{choices: [{text}], usage}`. Auth comes from the
/// `PLANHARNESS_API_KEY` environment variable.
pub struct RemoteBackend {
    base_url: String,
    api_key: Option<String>,
    calls: AtomicU64,
}

pub const API_KEY_ENV: &str = "PLANHARNESS_API_KEY";

impl RemoteBackend {
    pub fn new(base_url: impl Into<String>) -> Self {
        RemoteBackend {
            base_url: base_url.into(),
            api_key: std::env::var(API_KEY_ENV).ok(),
            calls: AtomicU64::new(0),
        }
    }
}

impl Backend for RemoteBackend {
    fn id(&self) -> &str {
        "remote"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let body = serde_json::json!({
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "top_p": request.top_p,
            "n": request.n_samples,
            "stop": request.stop,
            "model": request.model_name,
        });
        let mut call = ureq::post(&self.base_url).set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.set("Authorization", &format!("Bearer {key}"));
        }
        let response = call
            .send_json(body)
            .map_err(|e| Error::Other(format!("transport: {e}")))?;
        let payload: serde_json::Value = response
            .into_json()
            .map_err(|e| Error::BackendProtocol(format!("bad response body: {e}")))?;
        let choices = payload["choices"]
            .as_array()
            .ok_or_else(|| Error::BackendProtocol("response missing `choices`".into()))?;
        choices
            .iter()
            .map(|c| {
                c["text"]
                    .as_str()
                    .map(str::to_string)
                    .ok_or_else(|| Error::BackendProtocol("choice missing `text`".into()))
            })
            .collect()
    }

    fn call_count(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}
