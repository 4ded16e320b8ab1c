//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record at {path}:{line}: {message}")]
    MalformedRecord {
        path: String,
        line: usize,
        message: String,
    },

    #[error("missing field `{field}` for task {task_id}")]
    MissingField { field: String, task_id: String },

    #[error("duplicate task_id `{0}`")]
    DuplicateTaskId(String),

    #[error("empty exemplar pack")]
    EmptyPack,

    #[error("pack style {style} incompatible with {operation}")]
    PackStyleMismatch { style: String, operation: String },

    #[error("exemplar {index} is missing code (required for this style)")]
    ExemplarMissingCode { index: usize },

    #[error("task {task_id} has no reference solution")]
    MissingReference { task_id: String },

    #[error("unparseable plan")]
    UnparseablePlan,

    #[error("invalid pack file {path}: {message}")]
    InvalidPack { path: String, message: String },

    #[error("retries exhausted after {attempts} attempts: {last_error}")]
    RetryExhausted { attempts: u32, last_error: String },

    #[error("replay cache miss for request hash {0}")]
    CacheMiss(String),

    #[error("backend protocol violation: {0}")]
    BackendProtocol(String),

    #[error("backend not configured: {0}")]
    BackendUnconfigured(String),

    #[error("pass@k requires k <= n (got n={n}, k={k})")]
    KExceedsN { n: u64, k: u64 },

    #[error("pass@k requires c <= n (got n={n}, c={c})")]
    CExceedsN { n: u64, c: u64 },

    #[error("empty task set")]
    EmptyTaskSet,

    #[error("empty reference")]
    EmptyReference,

    #[error("invalid config: {field}: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("sandbox error: {0}")]
    Sandbox(String),

    #[error("run failed: {failed} of {total} tasks errored (limit {limit:.2})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        limit: f64,
    },

    #[error("mismatched corpora across runs: {0}")]
    CorpusMismatch(String),

    #[error("{0}")]
    Other(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
