use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::LlmError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Attempts after the first one.
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            initial_backoff_ms: 500,
            max_backoff_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    /// Exponential backoff before retry number `attempt` (1-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64 << attempt.saturating_sub(1).min(20);
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

/// Connection and sampling settings for a completions-style endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LLMConfig {
    /// Base URL, e.g. `https://api.example.com`.
    pub endpoint: String,
    pub path: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub stop: Vec<String>,
    pub timeout_secs: f64,
    pub parallelism: usize,
    pub retry: RetryPolicy,
    /// Environment variable holding a bearer token. Unset means no auth header.
    pub api_key_env: Option<String>,
}

impl Default for LLMConfig {
    fn default() -> Self {
        LLMConfig {
            endpoint: "http://127.0.0.1:8000".into(),
            path: "/v1/completions".into(),
            model: "text-davinci-002".into(),
            temperature: 0.0,
            max_tokens: 512,
            stop: vec!["[PLAN END]".into(), "[ANSWER END]".into()],
            timeout_secs: 60.0,
            parallelism: 4,
            retry: RetryPolicy::default(),
            api_key_env: None,
        }
    }
}

impl LLMConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::Config(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        if self.parallelism == 0 {
            return Err(LlmError::Config("parallelism must be >= 1".into()));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(LlmError::Config("timeout_secs must be positive".into()));
        }
        Ok(())
    }

    /// Reads a TOML file, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        let config: LLMConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| LlmError::Config(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| LlmError::Config(e.to_string()))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn url(&self) -> String {
        format!("{}/{}", self.endpoint.trim_end_matches('/'), self.path.trim_start_matches('/'))
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn api_key(&self) -> Option<String> {
        self.api_key_env.as_deref().and_then(|v| std::env::var(v).ok()).filter(|k| !k.is_empty())
    }
}
