//! Deterministic offline backends.
//!
//! Every mock is a pure function of the request bytes and its configured seed,
//! so a full mock run reproduces bit-for-bit on any machine.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{
    BackendError, DescriberRequest, DescriberResponse, Describer, EmbedRequest, EmbedResponse,
    Embedder, FeatureExtractor, FeatureRequest, FeatureResponse, Generator, GeneratorRequest,
    GeneratorResponse, Usage,
};
use crate::digest::{sha256_bytes, short_hash};
use crate::imaging;
use crate::model::word_count;

pub const MOCK_EMBED_DIM: usize = 64;
pub const MOCK_FEATURE_DIM: usize = 16;
pub const MOCK_ENCODER_ID: &str = "mock-embed-v1";

const DESC_PREFIX: &str = "MOCK-DESC(";

/// Text the mock describer emits for an image/prompt pair.
pub fn mock_description(image: &[u8], prompt: &str) -> String {
    format!(
        "{DESC_PREFIX}{}, {})",
        short_hash(image),
        short_hash(prompt.as_bytes())
    )
}

/// Extracts the input-image hash from a mock description embedded in `text`.
pub fn parse_mock_description(text: &str) -> Option<&str> {
    let start = text.find(DESC_PREFIX)? + DESC_PREFIX.len();
    let rest = &text[start..];
    let end = rest.find(',')?;
    Some(&rest[..end])
}

/// Describes an image as `MOCK-DESC(<image hash>, <prompt hash>)`.
#[derive(Debug, Clone, Default)]
pub struct MockDescriber;

#[async_trait]
impl Describer for MockDescriber {
    fn id(&self) -> String {
        "mock-describer".into()
    }

    async fn describe(&self, req: &DescriberRequest) -> Result<DescriberResponse, BackendError> {
        imaging::decode_check(&req.image).map_err(BackendError::malformed)?;
        let text = mock_description(&req.image, &req.prompt);
        Ok(DescriberResponse {
            usage: Usage {
                input_tokens: word_count(&req.prompt) as u64,
                output_tokens: word_count(&text) as u64,
            },
            provider_raw_id: None,
            text,
        })
    }
}

/// Emits a fixed sequence of descriptions, one per call, then fails.
#[derive(Debug)]
pub struct ScriptedDescriber {
    id: String,
    script: Mutex<VecDeque<String>>,
}

impl ScriptedDescriber {
    pub fn new(id: impl Into<String>, script: impl IntoIterator<Item = String>) -> Self {
        Self {
            id: id.into(),
            script: Mutex::new(script.into_iter().collect()),
        }
    }
}

#[async_trait]
impl Describer for ScriptedDescriber {
    fn id(&self) -> String {
        self.id.clone()
    }

    async fn describe(&self, _req: &DescriberRequest) -> Result<DescriberResponse, BackendError> {
        let text = self
            .script
            .lock()
            .unwrap()
            .pop_front()
            .ok_or_else(|| BackendError::malformed("script exhausted"))?;
        Ok(DescriberResponse {
            text,
            usage: Usage::default(),
            provider_raw_id: None,
        })
    }
}

/// Stands in for a person typing descriptions into the annotator server.
/// Runs driven by the server never call it; anything that does gets a
/// non-retryable error.
#[derive(Debug, Clone)]
pub struct HumanDescriber {
    annotator: String,
}

impl HumanDescriber {
    pub fn new(annotator: impl Into<String>) -> Self {
        Self {
            annotator: annotator.into(),
        }
    }
}

#[async_trait]
impl Describer for HumanDescriber {
    fn id(&self) -> String {
        format!("human:{}", self.annotator)
    }

    async fn describe(&self, _req: &DescriberRequest) -> Result<DescriberResponse, BackendError> {
        Err(BackendError::malformed("human descriptions are submitted through the annotator API"))
    }
}

#[derive(Debug, Clone)]
enum GenMode {
    Render,
    /// Returns the registered image whose hash appears in the prompt.
    Echo(Arc<Mutex<HashMap<String, Vec<u8>>>>),
}

/// Renders a 64×64 PNG from the prompt hash: a solid background with an 8×8
/// glyph grid drawn from the hash bits.
#[derive(Debug, Clone)]
pub struct MockGenerator {
    seed: u64,
    mode: GenMode,
    refuse_marker: Option<String>,
}

impl MockGenerator {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            mode: GenMode::Render,
            refuse_marker: None,
        }
    }

    /// Echo mode: pair with [`MockDescriber`] so that X^(t) is byte-identical
    /// to X^(t-1). Seed images must be registered first.
    pub fn echo() -> Self {
        Self {
            seed: 0,
            mode: GenMode::Echo(Arc::default()),
            refuse_marker: None,
        }
    }

    /// Refuses any prompt containing `marker`, like a provider safety filter.
    pub fn refusing(mut self, marker: impl Into<String>) -> Self {
        self.refuse_marker = Some(marker.into());
        self
    }

    pub fn register(&self, image: &[u8]) {
        if let GenMode::Echo(reg) = &self.mode {
            reg.lock()
                .unwrap()
                .insert(short_hash(image), image.to_vec());
        }
    }

    pub fn is_echo(&self) -> bool {
        matches!(self.mode, GenMode::Echo(_))
    }

    pub fn render(&self, prompt: &str) -> Vec<u8> {
        let mut input = self.seed.to_le_bytes().to_vec();
        input.extend_from_slice(prompt.as_bytes());
        let h = sha256_bytes(&input);
        let bg = Rgb([h[0], h[1], h[2]]);
        let fg = Rgb([255 - h[0], 255 - h[1], 255 - h[2]]);
        let mut img = RgbImage::from_pixel(64, 64, bg);
        for cell in 0..64usize {
            let bit = (h[3 + cell / 8] >> (cell % 8)) & 1;
            if bit == 1 {
                let (cx, cy) = ((cell % 8) as u32 * 8, (cell / 8) as u32 * 8);
                for y in cy + 1..cy + 7 {
                    for x in cx + 1..cx + 7 {
                        img.put_pixel(x, y, fg);
                    }
                }
            }
        }
        imaging::encode_png(&img)
    }
}

#[async_trait]
impl Generator for MockGenerator {
    fn id(&self) -> String {
        match self.mode {
            GenMode::Render => format!("mock-generator-s{}", self.seed),
            GenMode::Echo(_) => "mock-generator-echo".into(),
        }
    }

    async fn generate(&self, req: &GeneratorRequest) -> Result<GeneratorResponse, BackendError> {
        if req.prompt.trim().is_empty() {
            return Err(BackendError::malformed("empty generation prompt"));
        }
        if let Some(marker) = &self.refuse_marker {
            if req.prompt.contains(marker.as_str()) {
                return Err(BackendError::refused("prompt rejected by mock safety filter"));
            }
        }
        let image = match &self.mode {
            GenMode::Render => self.render(&req.prompt),
            GenMode::Echo(reg) => {
                let hash = parse_mock_description(&req.prompt)
                    .ok_or_else(|| BackendError::malformed("echo prompt carries no image hash"))?;
                reg.lock()
                    .unwrap()
                    .get(hash)
                    .cloned()
                    .ok_or_else(|| BackendError::malformed(format!("no registered image {hash}")))?
            }
        };
        Ok(GeneratorResponse {
            image,
            format: "png".into(),
        })
    }
}

fn seeded_rng(domain: &[u8], seed: u64, bytes: &[u8]) -> ChaCha8Rng {
    let mut input = domain.to_vec();
    input.extend_from_slice(&seed.to_le_bytes());
    input.extend_from_slice(bytes);
    ChaCha8Rng::from_seed(sha256_bytes(&input))
}

/// Unit vector in R^64 drawn from a generator seeded by the image bytes.
#[derive(Debug, Clone, Default)]
pub struct MockEmbedder {
    seed: u64,
}

impl MockEmbedder {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }
}

#[async_trait]
impl Embedder for MockEmbedder {
    fn id(&self) -> String {
        MOCK_ENCODER_ID.into()
    }

    async fn embed(&self, req: &EmbedRequest) -> Result<EmbedResponse, BackendError> {
        imaging::decode_check(&req.image).map_err(BackendError::malformed)?;
        let mut rng = seeded_rng(b"embed", self.seed, &req.image);
        let raw: Vec<f64> = (0..MOCK_EMBED_DIM)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(EmbedResponse {
            vector: raw.iter().map(|v| v / norm).collect(),
            dim: MOCK_EMBED_DIM,
            encoder_id: MOCK_ENCODER_ID.into(),
        })
    }
}

/// Gaussian feature vector seeded by the image bytes.
#[derive(Debug, Clone)]
pub struct MockFeatureExtractor {
    seed: u64,
    dim: usize,
}

impl MockFeatureExtractor {
    pub fn new(seed: u64, dim: usize) -> Self {
        Self { seed, dim }
    }
}

impl Default for MockFeatureExtractor {
    fn default() -> Self {
        Self::new(0, MOCK_FEATURE_DIM)
    }
}

#[async_trait]
impl FeatureExtractor for MockFeatureExtractor {
    fn id(&self) -> String {
        format!("mock-fid-v1-d{}", self.dim)
    }

    async fn extract_features(&self, req: &FeatureRequest) -> Result<FeatureResponse, BackendError> {
        imaging::decode_check(&req.image).map_err(BackendError::malformed)?;
        let mut rng = seeded_rng(b"features", self.seed, &req.image);
        Ok(FeatureResponse {
            vector: (0..self.dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect(),
            dim: self.dim,
            feature_id: self.id(),
        })
    }
}
