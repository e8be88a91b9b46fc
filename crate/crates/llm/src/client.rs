use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::cache::{sha256_hex, Cache, CacheEntry};
use crate::{LLMConfig, LlmError};

/// Anything that turns a prompt into completion text.
pub trait Completer: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, LlmError>;
}

impl<F> Completer for F
where
    F: Fn(&str) -> Result<String, LlmError> + Send + Sync,
{
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        self(prompt)
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    stop: &'a [String],
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    message: Option<Message>,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

/// Client for an OpenAI-style `/v1/completions` endpoint.
pub struct HttpCompleter {
    config: LLMConfig,
    client: reqwest::blocking::Client,
}

enum Attempt {
    Done(String),
    Retry(LlmError, Option<Duration>),
    Fatal(LlmError),
}

/// Upper bound on a server-requested wait.
const MAX_RETRY_AFTER: Duration = Duration::from_secs(120);

impl HttpCompleter {
    pub fn new(config: LLMConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout())
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(HttpCompleter { config, client })
    }

    fn attempt(&self, prompt: &str) -> Attempt {
        let body = CompletionRequest {
            model: &self.config.model,
            prompt,
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
            stop: &self.config.stop,
        };
        let mut req = self
            .client
            .post(self.config.url())
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(serde_json::to_vec(&body).expect("request serializes"));
        if let Some(key) = self.config.api_key() {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retry(LlmError::Timeout, None),
            Err(e) => return Attempt::Retry(LlmError::Transport(e.to_string()), None),
        };
        let status = resp.status();
        let retry_after = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|s| s.is_finite() && *s >= 0.0)
            .map(|s| Duration::from_secs_f64(s).min(MAX_RETRY_AFTER));
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) if e.is_timeout() => return Attempt::Retry(LlmError::Timeout, None),
            Err(e) => return Attempt::Retry(LlmError::Transport(e.to_string()), None),
        };
        if status.as_u16() == 429 {
            return Attempt::Retry(LlmError::RateLimited, retry_after);
        }
        if status.is_server_error() {
            return Attempt::Retry(LlmError::Http { status: status.as_u16(), body: text }, retry_after);
        }
        if !status.is_success() {
            return Attempt::Fatal(LlmError::Http { status: status.as_u16(), body: text });
        }
        match serde_json::from_str::<CompletionResponse>(&text) {
            Ok(r) => match r.choices.into_iter().next() {
                Some(Choice { text: Some(t), .. }) => Attempt::Done(t),
                Some(Choice { message: Some(m), .. }) => Attempt::Done(m.content),
                _ => Attempt::Fatal(LlmError::Malformed("no completion choice".into())),
            },
            Err(e) => Attempt::Fatal(LlmError::Malformed(e.to_string())),
        }
    }
}

impl Completer for HttpCompleter {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let policy = &self.config.retry;
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.attempt(prompt) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e, wait) => {
                    if attempt > policy.max_retries {
                        return Err(LlmError::RetriesExhausted {
                            attempts: attempt,
                            last: Box::new(e),
                        });
                    }
                    std::thread::sleep(wait.unwrap_or_else(|| policy.backoff(attempt)));
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    /// Seconds. On a cache hit this is the latency recorded when the entry was filled.
    pub latency: f64,
    pub cached: bool,
}

/// A completer with an optional on-disk cache in front of it.
pub struct Llm {
    config: LLMConfig,
    backend: Box<dyn Completer>,
    cache: Option<Cache>,
}

impl Llm {
    pub fn http(config: LLMConfig, cache: Option<Cache>) -> Result<Self, LlmError> {
        let backend = HttpCompleter::new(config.clone())?;
        Ok(Llm {
            config,
            backend: Box::new(backend),
            cache,
        })
    }

    pub fn with_backend(config: LLMConfig, backend: Box<dyn Completer>, cache: Option<Cache>) -> Result<Self, LlmError> {
        config.validate()?;
        Ok(Llm { config, backend, cache })
    }

    pub fn config(&self) -> &LLMConfig {
        &self.config
    }

    pub fn cache(&self) -> Option<&Cache> {
        self.cache.as_ref()
    }

    pub fn query(&self, prompt: &str) -> Result<Completion, LlmError> {
        let (model, temperature) = (&self.config.model, self.config.temperature);
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(model, prompt, temperature)? {
                return Ok(Completion {
                    text: hit.completion,
                    latency: hit.latency,
                    cached: true,
                });
            }
        }
        let start = Instant::now();
        let text = self.backend.complete(prompt)?;
        let latency = start.elapsed().as_secs_f64();
        if let Some(cache) = &self.cache {
            cache.put(
                prompt,
                &CacheEntry {
                    model: model.clone(),
                    temperature,
                    prompt_sha256: sha256_hex(prompt.as_bytes()),
                    completion: text.clone(),
                    latency,
                },
            )?;
        }
        Ok(Completion {
            text,
            latency,
            cached: false,
        })
    }
}

/// One uncached request against `config`.
pub fn query(config: &LLMConfig, prompt: &str) -> Result<String, LlmError> {
    HttpCompleter::new(config.clone())?.complete(prompt)
}
