//! OpenAI-compatible chat-completions client with retry, rate limiting and
//! a bound on in-flight requests.

use std::thread;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use super::retry::{RateLimiter, RetryPolicy, Semaphore};
use super::{Backend, BackendConfig, BackendError, ConfigError, Generation, GenerationParams};
use crate::promptgen::PromptSpec;

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<Message<'a>>,
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
    seed: u64,
}

enum Attempt {
    Done(String),
    Retry(BackendError),
    Fatal(BackendError),
}

pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    model_id: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    limiter: RateLimiter,
    slots: Semaphore,
}

fn completions_url(endpoint: &str) -> String {
    let base = endpoint.trim_end_matches('/');
    if base.ends_with("/chat/completions") {
        base.to_string()
    } else if base.ends_with("/v1") {
        format!("{base}/chat/completions")
    } else {
        format!("{base}/v1/chat/completions")
    }
}

impl HttpBackend {
    /// Reads the bearer token from `cfg.api_key_env` when it is set.
    pub fn from_config(cfg: &BackendConfig) -> Result<Self, ConfigError> {
        let endpoint = cfg.endpoint_url.as_deref().ok_or(ConfigError::MissingEndpoint)?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.request_timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            agent,
            url: completions_url(endpoint),
            model_id: cfg.model_id.clone(),
            api_key: std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty()),
            retry: cfg.retry.into(),
            limiter: RateLimiter::new(cfg.rate_limit),
            slots: Semaphore::new(cfg.max_in_flight),
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn attempt(&self, body: &[u8], attempts: u32) -> Attempt {
        self.limiter.acquire();
        let _permit = self.slots.acquire();
        let mut req = self
            .agent
            .post(&self.url)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match req.send(body) {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(BackendError::Timeout { attempts }),
            Err(e) => {
                return Attempt::Retry(BackendError::Unavailable {
                    reason: e.to_string(),
                    attempts,
                })
            }
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(BackendError::Timeout { attempts }),
            Err(e) => {
                return Attempt::Retry(BackendError::Unavailable {
                    reason: format!("reading body: {e}"),
                    attempts,
                })
            }
        };
        match status {
            200..=299 => match parse_reply(&text) {
                Ok(content) => Attempt::Done(content),
                Err(reason) => Attempt::Fatal(BackendError::MalformedReply { reason, attempts }),
            },
            429 => Attempt::Retry(BackendError::RateLimited { attempts }),
            500..=599 => Attempt::Retry(BackendError::Unavailable {
                reason: format!("HTTP {status}"),
                attempts,
            }),
            _ => Attempt::Fatal(BackendError::Unavailable {
                reason: format!("HTTP {status}: {}", text.chars().take(200).collect::<String>()),
                attempts,
            }),
        }
    }
}

/// First choice's message content.
fn parse_reply(body: &str) -> Result<String, String> {
    let v: Value = serde_json::from_str(body).map_err(|e| format!("invalid JSON: {e}"))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| "missing choices[0].message.content".to_string())
}

impl Backend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn generate(&self, spec: &PromptSpec, params: &GenerationParams) -> Result<Generation, BackendError> {
        let mut messages = Vec::with_capacity(2);
        if !spec.system_message.is_empty() {
            messages.push(Message {
                role: "system",
                content: &spec.system_message,
            });
        }
        messages.push(Message {
            role: "user",
            content: &spec.user_message,
        });
        let body = serde_json::to_vec(&ChatRequest {
            model: &self.model_id,
            messages,
            temperature: params.temperature,
            top_p: params.top_p,
            max_tokens: params.max_tokens,
            seed: params.seed,
        })
        .expect("request serializes");

        let jitter_seed = u64::from_str_radix(spec.prompt_hash.get(..16).unwrap_or("0"), 16).unwrap_or(0);
        let mut jitter = ChaCha8Rng::seed_from_u64(jitter_seed ^ params.seed);
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body, attempts) {
                Attempt::Done(text) => return Ok(Generation { text, attempts }),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e) if attempts >= self.retry.max_attempts => {
                    log::warn!("{}: giving up after {attempts} attempts: {e}", spec.prompt_hash);
                    return Err(e);
                }
                Attempt::Retry(e) => {
                    let wait = self.retry.delay(attempts, jitter.random::<f64>());
                    log::debug!("{}: attempt {attempts} failed ({e}); retrying in {wait:?}", spec.prompt_hash);
                    thread::sleep(wait);
                }
            }
        }
    }
}
