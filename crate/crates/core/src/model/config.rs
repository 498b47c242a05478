use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CategorySet, ModelError};

/// Instruction sent to the describer with every image.
pub const DEFAULT_DESC_PROMPT: &str = "Please write a clear, precise, detailed, and concise description of all elements in the image. Focus on accurately depicting various aspects, including but not limited to the colors, shapes, positions, styles, texts and the relationships between different objects and subjects in the image. Your description should be thorough enough to guide a professional in recreating this image solely based on your textual representation. Remember, only include descriptive texts that directly pertain to the contents of the image. You must complete the description using less than 500 words.";

/// Placeholder substituted with the description in the generation template.
pub const DESCRIPTION_SLOT: &str = "{description}";

pub const DEFAULT_GEN_PROMPT_TEMPLATE: &str =
    "Generate an image that fully and precisely reflects this description: {description}";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    /// Total attempts per backend call, including the first.
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay_ms: 500,
            max_delay_ms: 30_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationKind {
    #[default]
    Pearson,
    Spearman,
}

/// Everything that determines a run. Serialized as TOML in config files and
/// snapshotted into the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Number of describe → generate iterations per chain (T).
    pub iterations: u32,
    pub describer: String,
    pub generator: String,
    pub encoder: String,
    pub fid_features: String,
    pub desc_prompt: String,
    pub gen_prompt_template: String,
    /// Descriptions must have strictly fewer whitespace-delimited words than this.
    pub word_limit: usize,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Maximum number of chains in flight.
    pub parallelism: usize,
    pub retry: RetryPolicy,
    /// Per-backend request budget; unlimited when absent.
    pub requests_per_minute: Option<u32>,
    pub dataset: PathBuf,
    pub categories: CategorySet,
    /// Base URL of the embedding sidecar.
    pub sidecar_url: String,
    /// Overrides the provider endpoint of HTTP describers/generators.
    pub provider_base_url: Option<String>,
    pub correlation: CorrelationKind,
    /// Seed mixed into mock backends.
    pub mock_seed: u64,
    /// Reuse content-addressed backend responses from the store cache.
    pub cache: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            iterations: 3,
            describer: "mock".into(),
            generator: "mock".into(),
            encoder: "mock".into(),
            fid_features: "mock".into(),
            desc_prompt: DEFAULT_DESC_PROMPT.into(),
            gen_prompt_template: DEFAULT_GEN_PROMPT_TEMPLATE.into(),
            word_limit: 500,
            temperature: 0.0,
            max_tokens: 700,
            parallelism: 4,
            retry: RetryPolicy::default(),
            requests_per_minute: None,
            dataset: PathBuf::from("dataset"),
            categories: CategorySet::mme(),
            sidecar_url: "http://127.0.0.1:8765".into(),
            provider_base_url: None,
            correlation: CorrelationKind::Pearson,
            mock_seed: 0,
            cache: true,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ModelError> {
        let config: Self =
            toml::from_str(text).map_err(|e| ModelError::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("RunConfig serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.into()));
        if self.iterations < 1 {
            return bad("iterations must be >= 1");
        }
        if self.word_limit < 1 {
            return bad("word_limit must be >= 1");
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return bad("temperature must be a finite value >= 0");
        }
        if self.parallelism < 1 {
            return bad("parallelism must be >= 1");
        }
        if self.retry.max_attempts < 1 {
            return bad("retry.max_attempts must be >= 1");
        }
        if self.requests_per_minute == Some(0) {
            return bad("requests_per_minute must be >= 1 when set");
        }
        if self.desc_prompt.trim().is_empty() {
            return bad("desc_prompt must not be empty");
        }
        if self.gen_prompt_template.matches(DESCRIPTION_SLOT).count() != 1 {
            return bad("gen_prompt_template must contain exactly one {description} slot");
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("RunConfig serializes to JSON");
        hex::encode(Sha256::digest(&json))
    }
}
