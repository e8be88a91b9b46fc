//! Completions-endpoint client, response cache and evaluation runner.

pub mod cache;
mod client;
mod config;
pub mod mock;
mod suite;

pub use cache::{Cache, CacheEntry};
pub use client::{query, Completer, Completion, HttpCompleter, Llm};
pub use config::{LLMConfig, RetryPolicy};
pub use suite::{run_suite, SuiteResult};

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("request timed out")]
    Timeout,
    #[error("rate limited")]
    RateLimited,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: Box<LlmError> },
    #[error("corrupt cache entry {path}: {reason}")]
    CacheCorrupt { path: String, reason: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
