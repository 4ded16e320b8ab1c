//! Uniform completion interface over three backends: a remote completion
//! API, a record/replay cache, and a scripted mock.
//!
//! Every request is keyed by a canonical digest of its content; replay mode
//! answers purely from the cache and treats a miss as an error, never as a
//! reason to call out.

mod backend;
mod cache;

pub use backend::{Backend, MockBackend, MockRule, PromptMatcher, RemoteBackend};
pub use cache::ReplayCache;

use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub top_p: f64,
    pub n_samples: u32,
    pub stop: Vec<String>,
    pub model_name: String,
    #[serde(default)]
    pub seed_hint: Option<i64>,
}

impl CompletionRequest {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 1 {
            return Err(Error::InvalidConfig {
                field: "n_samples".into(),
                message: "must be >= 1".into(),
            });
        }
        if self.max_tokens < 1 {
            return Err(Error::InvalidConfig {
                field: "max_tokens".into(),
                message: "must be >= 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub completions: Vec<String>,
    pub usage: TokenUsage,
    pub backend_id: String,
    pub request_hash: String,
}

/// Stable 256-bit digest of a request. Fields are hashed in fixed schema
/// order with length prefixes, so structurally equal requests hash equally
/// regardless of construction order, and any content change moves the hash.
pub fn canonical_request_hash(request: &CompletionRequest) -> String {
    let mut hasher = Sha256::new();
    let mut put = |bytes: &[u8]| {
        hasher.update((bytes.len() as u64).to_be_bytes());
        hasher.update(bytes);
    };
    put(request.prompt.as_bytes());
    put(&request.max_tokens.to_be_bytes());
    put(&request.temperature.to_bits().to_be_bytes());
    put(&request.top_p.to_bits().to_be_bytes());
    put(&request.n_samples.to_be_bytes());
    put(&(request.stop.len() as u64).to_be_bytes());
    for s in &request.stop {
        put(s.as_bytes());
    }
    put(request.model_name.as_bytes());
    match request.seed_hint {
        Some(seed) => put(&seed.to_be_bytes()),
        None => put(b""),
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheMode {
    Record,
    Replay,
    Passthrough,
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 5,
            base_delay: Duration::from_millis(200),
        }
    }
}

pub struct Gateway {
    backend: Option<Arc<dyn Backend>>,
    cache: Mutex<ReplayCache>,
    mode: CacheMode,
    retry: RetryPolicy,
    /// Serializes backend calls: one request in flight per backend key.
    in_flight: Mutex<()>,
}

impl Gateway {
    pub fn new(backend: Option<Arc<dyn Backend>>, cache: ReplayCache, mode: CacheMode) -> Self {
        Gateway {
            backend,
            cache: Mutex::new(cache),
            mode,
            retry: RetryPolicy::default(),
            in_flight: Mutex::new(()),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    /// Calls the backend actually made (cache hits excluded).
    pub fn backend_calls(&self) -> u64 {
        self.backend.as_ref().map_or(0, |b| b.call_count())
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse> {
        request.validate()?;
        let hash = canonical_request_hash(request);
        match self.mode {
            CacheMode::Replay => {
                let cache = self.cache.lock().unwrap();
                cache.get(&hash).cloned().ok_or(Error::CacheMiss(hash))
            }
            CacheMode::Record => {
                if let Some(hit) = self.cache.lock().unwrap().get(&hash) {
                    return Ok(hit.clone());
                }
                let response = self.call_backend(request, &hash)?;
                self.cache
                    .lock()
                    .unwrap()
                    .insert(request.clone(), response.clone())?;
                Ok(response)
            }
            CacheMode::Passthrough => self.call_backend(request, &hash),
        }
    }

    fn call_backend(&self, request: &CompletionRequest, hash: &str) -> Result<CompletionResponse> {
        let backend = self
            .backend
            .as_ref()
            .ok_or_else(|| Error::BackendUnconfigured("no backend for this mode".into()))?;
        let _guard = self.in_flight.lock().unwrap();
        let mut last_error = String::new();
        for attempt in 0..=self.retry.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.retry.base_delay * 2u32.pow(attempt - 1));
            }
            match backend.complete(request) {
                Ok(completions) => {
                    if completions.len() != request.n_samples as usize {
                        return Err(Error::BackendProtocol(format!(
                            "expected {} completions, got {}",
                            request.n_samples,
                            completions.len()
                        )));
                    }
                    return Ok(CompletionResponse {
                        usage: TokenUsage {
                            prompt_tokens: request.prompt.split_whitespace().count() as u64,
                            completion_tokens: completions
                                .iter()
                                .map(|c| c.split_whitespace().count() as u64)
                                .sum(),
                        },
                        completions,
                        backend_id: backend.id().to_string(),
                        request_hash: hash.to_string(),
                    });
                }
                Err(Error::BackendProtocol(m)) => return Err(Error::BackendProtocol(m)),
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(Error::RetryExhausted {
            attempts: self.retry.max_retries + 1,
            last_error,
        })
    }
}
