//! HTTP adapters for hosted describers and image generators.
//!
//! Describers share one chat-with-image request shape; each [`Provider`] only
//! supplies the mapping to and from its wire format.
//!
//! Credentials come from the environment: `OPENAI_API_KEY`,
//! `ANTHROPIC_API_KEY` and `GEMINI_API_KEY`.

use async_trait::async_trait;
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde_json::{json, Value};

use super::{
    classify_status, BackendError, DescriberRequest, DescriberResponse, Describer, Generator,
    GeneratorRequest, GeneratorResponse, Usage,
};
use crate::imaging;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provider {
    OpenAi,
    Anthropic,
    Gemini,
}

impl Provider {
    pub fn from_prefix(prefix: &str) -> Option<Self> {
        match prefix {
            "openai" => Some(Provider::OpenAi),
            "anthropic" => Some(Provider::Anthropic),
            "gemini" => Some(Provider::Gemini),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Provider::OpenAi => "openai",
            Provider::Anthropic => "anthropic",
            Provider::Gemini => "gemini",
        }
    }

    pub fn key_env(self) -> &'static str {
        match self {
            Provider::OpenAi => "OPENAI_API_KEY",
            Provider::Anthropic => "ANTHROPIC_API_KEY",
            Provider::Gemini => "GEMINI_API_KEY",
        }
    }

    pub fn default_base_url(self) -> &'static str {
        match self {
            Provider::OpenAi => "https://api.openai.com",
            Provider::Anthropic => "https://api.anthropic.com",
            Provider::Gemini => "https://generativelanguage.googleapis.com",
        }
    }
}

fn transport(e: reqwest::Error) -> BackendError {
    BackendError::transport(e.to_string())
}

async fn post_json(
    request: reqwest::RequestBuilder,
    body: &Value,
) -> Result<Value, BackendError> {
    let resp = request.json(body).send().await.map_err(transport)?;
    let status = resp.status();
    let text = resp.text().await.map_err(transport)?;
    if !status.is_success() {
        let class = classify_status(status.as_u16(), &text);
        return Err(BackendError::new(
            class,
            format!("HTTP {}: {}", status.as_u16(), truncate(&text, 300)),
        ));
    }
    serde_json::from_str(&text).map_err(|e| BackendError::malformed(format!("invalid JSON: {e}")))
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// Chat-with-image describer for a hosted model.
#[derive(Debug, Clone)]
pub struct ChatDescriber {
    client: reqwest::Client,
    provider: Provider,
    model: String,
    base_url: String,
    api_key: String,
}

impl ChatDescriber {
    pub fn new(
        provider: Provider,
        model: impl Into<String>,
        base_url: Option<String>,
        api_key: impl Into<String>,
    ) -> Self {
        Self {
            client: reqwest::Client::new(),
            provider,
            model: model.into(),
            base_url: base_url
                .unwrap_or_else(|| provider.default_base_url().to_string())
                .trim_end_matches('/')
                .to_string(),
            api_key: api_key.into(),
        }
    }

    /// Reads the API key from the provider's environment variable.
    pub fn from_env(
        provider: Provider,
        model: impl Into<String>,
        base_url: Option<String>,
    ) -> Result<Self, BackendError> {
        let key = std::env::var(provider.key_env()).map_err(|_| {
            BackendError::transport(format!("{} is not set", provider.key_env()))
        })?;
        Ok(Self::new(provider, model, base_url, key))
    }

    /// Provider request body for a describe call.
    pub fn request_body(&self, req: &DescriberRequest) -> Value {
        let mime = imaging::mime_type(&req.image);
        let data = B64.encode(&req.image);
        match self.provider {
            Provider::OpenAi => json!({
                "model": self.model,
                "temperature": req.temperature,
                "max_tokens": req.max_tokens,
                "messages": [{
                    "role": "user",
                    "content": [
                        {"type": "text", "text": req.prompt},
                        {"type": "image_url", "image_url": {"url": format!("data:{mime};base64,{data}")}},
                    ],
                }],
            }),
            Provider::Anthropic => json!({
                "model": self.model,
                "temperature": req.temperature,
                "max_tokens": req.max_tokens,
                "messages": [{
                    "role": "user",
                    "content": [
                        {"type": "image", "source": {"type": "base64", "media_type": mime, "data": data}},
                        {"type": "text", "text": req.prompt},
                    ],
                }],
            }),
            Provider::Gemini => json!({
                "contents": [{
                    "role": "user",
                    "parts": [
                        {"text": req.prompt},
                        {"inline_data": {"mime_type": mime, "data": data}},
                    ],
                }],
                "generationConfig": {"temperature": req.temperature, "maxOutputTokens": req.max_tokens},
            }),
        }
    }

    /// Maps a successful provider response body onto a [`DescriberResponse`].
    pub fn parse_response(&self, body: &Value) -> Result<DescriberResponse, BackendError> {
        let u64_at = |v: &Value, path: &[&str]| {
            path.iter()
                .try_fold(v, |acc, k| acc.get(*k))
                .and_then(Value::as_u64)
                .unwrap_or(0)
        };
        let (text, usage, id) = match self.provider {
            Provider::OpenAi => {
                let choice = body
                    .pointer("/choices/0")
                    .ok_or_else(|| BackendError::malformed("response has no choices"))?;
                if choice.pointer("/message/refusal").is_some_and(|r| !r.is_null())
                    || choice.get("finish_reason").and_then(Value::as_str) == Some("content_filter")
                {
                    return Err(BackendError::refused("provider refused to describe the image"));
                }
                let text = choice
                    .pointer("/message/content")
                    .and_then(Value::as_str)
                    .unwrap_or_default()
                    .to_string();
                let usage = Usage {
                    input_tokens: u64_at(body, &["usage", "prompt_tokens"]),
                    output_tokens: u64_at(body, &["usage", "completion_tokens"]),
                };
                (text, usage, body.get("id").and_then(Value::as_str))
            }
            Provider::Anthropic => {
                if body.get("stop_reason").and_then(Value::as_str) == Some("refusal") {
                    return Err(BackendError::refused("provider refused to describe the image"));
                }
                let text = body
                    .get("content")
                    .and_then(Value::as_array)
                    .ok_or_else(|| BackendError::malformed("response has no content"))?
                    .iter()
                    .filter(|b| b.get("type").and_then(Value::as_str) == Some("text"))
                    .filter_map(|b| b.get("text").and_then(Value::as_str))
                    .collect::<Vec<_>>()
                    .join("");
                let usage = Usage {
                    input_tokens: u64_at(body, &["usage", "input_tokens"]),
                    output_tokens: u64_at(body, &["usage", "output_tokens"]),
                };
                (text, usage, body.get("id").and_then(Value::as_str))
            }
            Provider::Gemini => {
                if body.pointer("/promptFeedback/blockReason").is_some() {
                    return Err(BackendError::refused("prompt blocked by provider"));
                }
                let cand = body
                    .pointer("/candidates/0")
                    .ok_or_else(|| BackendError::malformed("response has no candidates"))?;
                if matches!(
                    cand.get("finishReason").and_then(Value::as_str),
                    Some("SAFETY" | "PROHIBITED_CONTENT" | "BLOCKLIST")
                ) {
                    return Err(BackendError::refused("candidate blocked by provider"));
                }
                let text = cand
                    .pointer("/content/parts")
                    .and_then(Value::as_array)
                    .map(|parts| {
                        parts
                            .iter()
                            .filter_map(|p| p.get("text").and_then(Value::as_str))
                            .collect::<Vec<_>>()
                            .join("")
                    })
                    .unwrap_or_default();
                let usage = Usage {
                    input_tokens: u64_at(body, &["usageMetadata", "promptTokenCount"]),
                    output_tokens: u64_at(body, &["usageMetadata", "candidatesTokenCount"]),
                };
                (text, usage, body.get("responseId").and_then(Value::as_str))
            }
        };
        if text.trim().is_empty() {
            return Err(BackendError::malformed("provider returned an empty description"));
        }
        Ok(DescriberResponse {
            text,
            usage,
            provider_raw_id: id.map(str::to_string),
        })
    }

    fn request(&self) -> reqwest::RequestBuilder {
        match self.provider {
            Provider::OpenAi => self
                .client
                .post(format!("{}/v1/chat/completions", self.base_url))
                .bearer_auth(&self.api_key),
            Provider::Anthropic => self
                .client
                .post(format!("{}/v1/messages", self.base_url))
                .header("x-api-key", &self.api_key)
                .header("anthropic-version", "2023-06-01"),
            Provider::Gemini => self
                .client
                .post(format!(
                    "{}/v1beta/models/{}:generateContent",
                    self.base_url, self.model
                ))
                .header("x-goog-api-key", &self.api_key),
        }
    }
}

#[async_trait]
impl Describer for ChatDescriber {
    fn id(&self) -> String {
        format!("{}:{}", self.provider.name(), self.model)
    }

    async fn describe(&self, req: &DescriberRequest) -> Result<DescriberResponse, BackendError> {
        let body = post_json(self.request(), &self.request_body(req)).await?;
        self.parse_response(&body)
    }
}

/// OpenAI-compatible image generation endpoint (`/v1/images/generations`).
#[derive(Debug, Clone)]
pub struct ImageGenerator {
    client: reqwest::Client,
    model: String,
    base_url: String,
    api_key: String,
}

impl ImageGenerator {
    pub fn new(model: impl Into<String>, base_url: Option<String>, api_key: impl Into<String>) -> Self {
        Self {
            client: reqwest::Client::new(),
            model: model.into(),
            base_url: base_url
                .unwrap_or_else(|| Provider::OpenAi.default_base_url().to_string())
                .trim_end_matches('/')
                .to_string(),
            api_key: api_key.into(),
        }
    }

    pub fn from_env(model: impl Into<String>, base_url: Option<String>) -> Result<Self, BackendError> {
        let key = std::env::var(Provider::OpenAi.key_env())
            .map_err(|_| BackendError::transport("OPENAI_API_KEY is not set"))?;
        Ok(Self::new(model, base_url, key))
    }

    pub fn request_body(&self, req: &GeneratorRequest) -> Value {
        let mut body = json!({
            "model": self.model,
            "prompt": req.prompt,
            "n": 1,
            "response_format": "b64_json",
        });
        if let Some(size) = &req.size {
            body["size"] = json!(size);
        }
        body
    }

    /// Takes the first returned image and normalizes it to PNG.
    pub fn parse_response(body: &Value) -> Result<GeneratorResponse, BackendError> {
        let b64 = body
            .pointer("/data/0/b64_json")
            .and_then(Value::as_str)
            .ok_or_else(|| BackendError::malformed("response carries no image"))?;
        let raw = B64
            .decode(b64)
            .map_err(|e| BackendError::malformed(format!("invalid base64 image: {e}")))?;
        let image = imaging::to_png(&raw).map_err(BackendError::malformed)?;
        Ok(GeneratorResponse {
            image,
            format: "png".into(),
        })
    }
}

#[async_trait]
impl Generator for ImageGenerator {
    fn id(&self) -> String {
        format!("openai-images:{}", self.model)
    }

    async fn generate(&self, req: &GeneratorRequest) -> Result<GeneratorResponse, BackendError> {
        let request = self
            .client
            .post(format!("{}/v1/images/generations", self.base_url))
            .bearer_auth(&self.api_key);
        let body = post_json(request, &self.request_body(req)).await?;
        Self::parse_response(&body)
    }
}
