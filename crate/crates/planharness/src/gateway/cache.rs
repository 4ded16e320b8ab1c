//! Append-only record/replay cache keyed by canonical request hash.
//!
//! On disk the cache is line-delimited JSON: one
//! `{request_hash, request, response, timestamp}` record per line. Rewriting
//! never happens; re-recording an existing hash is a no-op.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{canonical_request_hash, CompletionRequest, CompletionResponse};

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    request_hash: String,
    request: CompletionRequest,
    response: CompletionResponse,
    timestamp: u64,
}

pub struct ReplayCache {
    entries: HashMap<String, CompletionResponse>,
    path: Option<PathBuf>,
}

impl ReplayCache {
    pub fn in_memory() -> Self {
        ReplayCache {
            entries: HashMap::new(),
            path: None,
        }
    }

    /// Open (or create) a file-backed cache, loading all existing records.
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let file = std::fs::File::open(path)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            for (idx, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: CacheRecord =
                    serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                        path: path.display().to_string(),
                        line: idx + 1,
                        message: e.to_string(),
                    })?;
                entries.insert(record.request_hash, record.response);
            }
        }
        Ok(ReplayCache {
            entries,
            path: Some(path.to_path_buf()),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, hash: &str) -> Option<&CompletionResponse> {
        self.entries.get(hash)
    }

    pub fn insert(
        &mut self,
        request: CompletionRequest,
        response: CompletionResponse,
    ) -> Result<()> {
        let hash = canonical_request_hash(&request);
        if self.entries.contains_key(&hash) {
            return Ok(());
        }
        if let Some(path) = &self.path {
            let record = CacheRecord {
                request_hash: hash.clone(),
                request,
                response: response.clone(),
                timestamp: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
            };
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            let line = serde_json::to_string(&record)
                .map_err(|e| Error::Other(format!("cache serialization: {e}")))?;
            writeln!(file, "{line}").map_err(|e| Error::io(path.display().to_string(), e))?;
        }
        self.entries.insert(hash, response);
        Ok(())
    }
}
