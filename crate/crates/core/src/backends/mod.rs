//! Clients for the three remote roles (describer, generator, embedder /
//! feature extractor), deterministic mocks, and call-policy plumbing.
//!
//! Every provider failure is normalized into exactly one [`ErrorClass`].

mod factory;
mod http;
mod limiter;
pub mod mock;
mod recording;
mod sidecar;

pub use factory::{build_backends, Backends};
pub use http::{ChatDescriber, ImageGenerator, Provider};
pub use limiter::{CallPolicy, Clock, ManualClock, RateLimiter, SystemClock};
pub use recording::{CallLog, CallRecord, Gate, Gated, Recorded, Role};
pub use sidecar::{HealthStatus, SidecarClient};

use std::fmt;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    RateLimited,
    Refused,
    Transport,
    Malformed,
}

impl ErrorClass {
    /// Malformed responses are deterministic for a given request; everything
    /// else may succeed on a later attempt.
    pub fn is_retryable(self) -> bool {
        !matches!(self, ErrorClass::Malformed)
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorClass::RateLimited => "rate_limited",
            ErrorClass::Refused => "refused",
            ErrorClass::Transport => "transport",
            ErrorClass::Malformed => "malformed",
        })
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{class}: {message}")]
pub struct BackendError {
    pub class: ErrorClass,
    pub message: String,
}

impl BackendError {
    pub fn new(class: ErrorClass, message: impl Into<String>) -> Self {
        Self {
            class,
            message: message.into(),
        }
    }

    pub fn rate_limited(m: impl Into<String>) -> Self {
        Self::new(ErrorClass::RateLimited, m)
    }

    pub fn refused(m: impl Into<String>) -> Self {
        Self::new(ErrorClass::Refused, m)
    }

    pub fn transport(m: impl Into<String>) -> Self {
        Self::new(ErrorClass::Transport, m)
    }

    pub fn malformed(m: impl Into<String>) -> Self {
        Self::new(ErrorClass::Malformed, m)
    }
}

/// Maps an HTTP failure status (and body) onto an error class.
///
/// Total over all status codes: 429 and 529 are rate limiting, 5xx and auth
/// or routing problems are transport, content-policy rejections are refusals,
/// and the remaining client errors are malformed requests.
pub fn classify_status(status: u16, body: &str) -> ErrorClass {
    let lower = body.to_ascii_lowercase();
    let policy = ["content_policy", "content policy", "safety", "refus", "moderation", "blocked"]
        .iter()
        .any(|k| lower.contains(k));
    match status {
        429 | 529 => ErrorClass::RateLimited,
        400..=499 if policy => ErrorClass::Refused,
        401 | 403 | 404 | 407 | 408 => ErrorClass::Transport,
        400..=499 => ErrorClass::Malformed,
        _ => ErrorClass::Transport,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriberRequest {
    pub prompt: String,
    pub image: Vec<u8>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl DescriberRequest {
    pub fn new(
        prompt: impl Into<String>,
        image: Vec<u8>,
        temperature: f64,
        max_tokens: u32,
    ) -> Result<Self, BackendError> {
        let prompt = prompt.into();
        if prompt.trim().is_empty() {
            return Err(BackendError::malformed("empty describer prompt"));
        }
        if image.is_empty() {
            return Err(BackendError::malformed("empty input image"));
        }
        Ok(Self {
            prompt,
            image,
            temperature,
            max_tokens,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriberResponse {
    pub text: String,
    pub usage: Usage,
    pub provider_raw_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorRequest {
    pub prompt: String,
    pub temperature: f64,
    /// Provider size string (e.g. `1024x1024`); provider default when absent.
    pub size: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorResponse {
    /// PNG bytes of the first returned image.
    pub image: Vec<u8>,
    pub format: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedRequest {
    pub image: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vector: Vec<f64>,
    pub dim: usize,
    pub encoder_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRequest {
    pub image: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureResponse {
    pub vector: Vec<f64>,
    pub dim: usize,
    pub feature_id: String,
}

#[async_trait]
pub trait Describer: Send + Sync {
    fn id(&self) -> String;
    async fn describe(&self, req: &DescriberRequest) -> Result<DescriberResponse, BackendError>;
}

#[async_trait]
pub trait Generator: Send + Sync {
    fn id(&self) -> String;
    async fn generate(&self, req: &GeneratorRequest) -> Result<GeneratorResponse, BackendError>;
}

#[async_trait]
pub trait Embedder: Send + Sync {
    fn id(&self) -> String;
    async fn embed(&self, req: &EmbedRequest) -> Result<EmbedResponse, BackendError>;
}

#[async_trait]
pub trait FeatureExtractor: Send + Sync {
    fn id(&self) -> String;
    async fn extract_features(&self, req: &FeatureRequest) -> Result<FeatureResponse, BackendError>;
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn status_mapping() {
        assert_eq!(classify_status(429, ""), ErrorClass::RateLimited);
        assert_eq!(classify_status(500, ""), ErrorClass::Transport);
        assert_eq!(classify_status(503, "overloaded"), ErrorClass::Transport);
        assert_eq!(
            classify_status(400, r#"{"error":{"code":"content_policy_violation"}}"#),
            ErrorClass::Refused
        );
        assert_eq!(classify_status(400, "bad field"), ErrorClass::Malformed);
        assert_eq!(classify_status(401, ""), ErrorClass::Transport);
    }

    #[test]
    fn describer_request_preconditions() {
        assert!(DescriberRequest::new("p", vec![], 0.0, 10).is_err());
        assert!(DescriberRequest::new("  ", vec![1], 0.0, 10).is_err());
        let r = DescriberRequest::new("describe", vec![1], 0.0, 10).unwrap();
        assert_eq!(r.prompt, "describe");
    }

    proptest! {
        #[test]
        fn classification_is_total(status in 0u16..1000, body in ".{0,40}") {
            let class = classify_status(status, &body);
            let expected_rl = status == 429 || status == 529;
            prop_assert_eq!(class == ErrorClass::RateLimited, expected_rl);
        }
    }
}
