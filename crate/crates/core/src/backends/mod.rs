//! Model backends: a deterministic synthetic crowd and an OpenAI-compatible
//! HTTP client.

mod http;
mod mock;
mod retry;
pub mod stub;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emotions::EmotionLabel;
use crate::extraction::{extract_miles, ExtractionRule};
use crate::promptgen::{PromptSpec, PromptType};

pub use http::HttpBackend;
pub use mock::{CrowdModel, Distribution, MockBackend, WeightedDistribution, REFUSAL_TEXT};
pub use retry::{RateLimiter, RetryPolicy, Semaphore};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend unavailable after {attempts} attempt(s): {reason}")]
    Unavailable { reason: String, attempts: u32 },
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("malformed reply after {attempts} attempt(s): {reason}")]
    MalformedReply { reason: String, attempts: u32 },
}

impl BackendError {
    pub fn attempts(&self) -> u32 {
        match self {
            BackendError::Unavailable { attempts, .. }
            | BackendError::Timeout { attempts }
            | BackendError::RateLimited { attempts }
            | BackendError::MalformedReply { attempts, .. } => *attempts,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("http backend requires endpoint_url")]
    MissingEndpoint,
    #[error("max_in_flight must be at least 1")]
    NoConcurrency,
    #[error("retry.max_attempts must be at least 1")]
    NoAttempts,
    #[error("{0}")]
    Invalid(String),
}

/// Decoding parameters sent with every request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub seed: u64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 0.7,
            top_p: 0.95,
            max_tokens: 128,
            seed: 0,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.temperature >= 0.0) {
            return Err(ConfigError::Invalid(format!("temperature {} < 0", self.temperature)));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ConfigError::Invalid(format!("top_p {} outside (0, 1]", self.top_p)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryConfig {
    pub max_attempts: u32,
    pub base_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryConfig {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_backoff_ms: 500,
            max_backoff_ms: 30_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint_url: Option<String>,
    pub model_id: String,
    pub max_in_flight: usize,
    pub request_timeout_secs: f64,
    pub retry: RetryConfig,
    /// Requests per second; zero or absent means unlimited.
    pub rate_limit: Option<f64>,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    /// Synthetic crowd for the mock backend.
    pub crowd: CrowdModel,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            endpoint_url: None,
            model_id: "mock-crowd".to_string(),
            max_in_flight: 8,
            request_timeout_secs: 60.0,
            retry: RetryConfig::default(),
            rate_limit: None,
            api_key_env: "OPENAI_API_KEY".to_string(),
            crowd: CrowdModel::default(),
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_in_flight == 0 {
            return Err(ConfigError::NoConcurrency);
        }
        if self.retry.max_attempts == 0 {
            return Err(ConfigError::NoAttempts);
        }
        if self.retry.base_backoff_ms > self.retry.max_backoff_ms {
            return Err(ConfigError::Invalid("retry.base_backoff_ms exceeds max_backoff_ms".into()));
        }
        if !(self.request_timeout_secs > 0.0) {
            return Err(ConfigError::Invalid("request_timeout_secs must be positive".into()));
        }
        match self.kind {
            BackendKind::Http if self.endpoint_url.as_deref().is_none_or(str::is_empty) => {
                Err(ConfigError::MissingEndpoint)
            }
            BackendKind::Mock => self.crowd.validate(),
            _ => Ok(()),
        }
    }

    /// Builds the configured backend.
    pub fn build(&self) -> Result<Box<dyn Backend>, ConfigError> {
        self.validate()?;
        Ok(match self.kind {
            BackendKind::Mock => Box::new(MockBackend::new(self.crowd.clone(), &self.model_id)),
            BackendKind::Http => Box::new(HttpBackend::from_config(self)?),
        })
    }
}

/// One completion and how many attempts it took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    pub text: String,
    pub attempts: u32,
}

/// A text-generation backend. Implementations must be safe to call from
/// several threads at once.
pub trait Backend: Send + Sync {
    /// Short tag persisted with each record (`mock`, `http`).
    fn name(&self) -> &str;
    fn model_id(&self) -> &str;
    fn generate(&self, spec: &PromptSpec, params: &GenerationParams) -> Result<Generation, BackendError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn model_id(&self) -> &str {
        (**self).model_id()
    }
    fn generate(&self, spec: &PromptSpec, params: &GenerationParams) -> Result<Generation, BackendError> {
        (**self).generate(spec, params)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn model_id(&self) -> &str {
        (**self).model_id()
    }
    fn generate(&self, spec: &PromptSpec, params: &GenerationParams) -> Result<Generation, BackendError> {
        (**self).generate(spec, params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    Error,
}

/// One persisted response line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub prompt_hash: String,
    pub prompt_type: PromptType,
    pub persona_id: Option<String>,
    pub emotion: Option<EmotionLabel>,
    pub replicate: Option<u32>,
    pub template_version: String,
    pub system_message: String,
    pub user_message: String,
    pub status: RecordStatus,
    pub error: Option<String>,
    pub raw_text: String,
    pub extracted_miles: Option<f64>,
    pub extraction_rule: ExtractionRule,
    pub source_span: Option<(usize, usize)>,
    pub backend: String,
    pub model_id: String,
    pub timestamp: DateTime<Utc>,
    pub attempt_count: u32,
}

impl ResponseRecord {
    /// Builds a record from a backend outcome, running extraction on success.
    pub fn from_outcome(
        spec: &PromptSpec,
        template_version: &str,
        backend: &dyn Backend,
        outcome: Result<Generation, BackendError>,
        timestamp: DateTime<Utc>,
    ) -> Self {
        let (status, error, raw_text, attempt_count) = match outcome {
            Ok(g) => (RecordStatus::Ok, None, g.text, g.attempts),
            Err(e) => (RecordStatus::Error, Some(e.to_string()), String::new(), e.attempts()),
        };
        let extracted = extract_miles(&raw_text);
        Self {
            prompt_hash: spec.prompt_hash.clone(),
            prompt_type: spec.prompt_type,
            persona_id: spec.persona.as_ref().map(|p| p.persona_id.clone()),
            emotion: spec.emotion,
            replicate: spec.replicate,
            template_version: template_version.to_string(),
            system_message: spec.system_message.clone(),
            user_message: spec.user_message.clone(),
            status,
            error,
            raw_text,
            extracted_miles: extracted.miles,
            extraction_rule: extracted.rule,
            source_span: extracted.source_span,
            backend: backend.name().to_string(),
            model_id: backend.model_id().to_string(),
            timestamp,
            attempt_count,
        }
    }

    /// True when `extracted_miles` agrees with re-running extraction.
    pub fn extraction_consistent(&self) -> bool {
        extract_miles(&self.raw_text).miles == self.extracted_miles
    }
}
