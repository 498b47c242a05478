use std::fmt;

use serde::{Deserialize, Serialize};

use super::{word_count, CategoryId, ModelError};

/// Identifier of a seed sample, unique within a dataset (e.g. `existence/0001`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SampleId(String);

impl SampleId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SampleId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

/// An original dataset image, X^(0) of a chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSample {
    pub id: SampleId,
    pub category: CategoryId,
    /// Locator of the seed image bytes (a filesystem path for directory datasets).
    pub image_ref: String,
}

/// An image embedding tagged with the encoder that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEmbedding", into = "RawEmbedding")]
pub struct EmbeddingVector {
    values: Vec<f64>,
    encoder_id: String,
}

#[derive(Serialize, Deserialize)]
struct RawEmbedding {
    values: Vec<f64>,
    dim: usize,
    encoder_id: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, encoder_id: impl Into<String>) -> Result<Self, ModelError> {
        if values.is_empty() {
            return Err(ModelError::InvalidEmbedding("zero-dimensional vector".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::InvalidEmbedding(format!(
                "non-finite entry at index {i}"
            )));
        }
        Ok(Self {
            values,
            encoder_id: encoder_id.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn encoder_id(&self) -> &str {
        &self.encoder_id
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl TryFrom<RawEmbedding> for EmbeddingVector {
    type Error = ModelError;

    fn try_from(raw: RawEmbedding) -> Result<Self, Self::Error> {
        if raw.dim != raw.values.len() {
            return Err(ModelError::InvalidEmbedding(format!(
                "dim {} does not match {} values",
                raw.dim,
                raw.values.len()
            )));
        }
        Self::new(raw.values, raw.encoder_id)
    }
}

impl From<EmbeddingVector> for RawEmbedding {
    fn from(e: EmbeddingVector) -> Self {
        Self {
            dim: e.values.len(),
            values: e.values,
            encoder_id: e.encoder_id,
        }
    }
}

/// One describe → generate → embed step of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Iteration index, starting at 1.
    pub t: u32,
    /// Description of X^(t-1), after word-limit enforcement.
    pub description: String,
    pub gen_prompt: String,
    /// Locator of X^(t), relative to the run directory.
    pub image_ref: String,
    /// Hex SHA-256 of the bytes of X^(t).
    pub image_sha256: String,
    pub embedding: Option<EmbeddingVector>,
    /// Cosine similarity between the embeddings of X^(0) and X^(t).
    pub similarity: Option<f64>,
    /// The describer output exceeded the word limit and was cut.
    #[serde(default)]
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "reason", rename_all = "snake_case")]
pub enum ChainStatus {
    Pending,
    InProgress,
    Complete,
    Failed(String),
}

impl ChainStatus {
    pub fn is_complete(&self) -> bool {
        matches!(self, ChainStatus::Complete)
    }

    pub fn is_failed(&self) -> bool {
        matches!(self, ChainStatus::Failed(_))
    }
}

/// The trajectory X^(0..k) of one seed with its similarities and score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub seed: SeedSample,
    pub seed_embedding: Option<EmbeddingVector>,
    pub iterations: Vec<IterationRecord>,
    pub gc_at_t: Option<f64>,
    pub status: ChainStatus,
}

impl ChainRecord {
    pub fn pending(seed: SeedSample) -> Self {
        Self {
            seed,
            seed_embedding: None,
            iterations: Vec::new(),
            gc_at_t: None,
            status: ChainStatus::Pending,
        }
    }

    /// Index of the next iteration to run.
    pub fn next_t(&self) -> u32 {
        self.iterations.len() as u32 + 1
    }

    /// All similarities in order, if every iteration has one.
    pub fn similarities(&self) -> Option<Vec<f64>> {
        self.iterations.iter().map(|it| it.similarity).collect()
    }

    /// Checks the structural invariants for a run with `t_max` iterations.
    pub fn check(&self, t_max: u32, word_limit: usize) -> Result<(), ModelError> {
        if self.iterations.len() > t_max as usize {
            return Err(ModelError::InvalidChain(format!(
                "{} iterations exceed T={t_max}",
                self.iterations.len()
            )));
        }
        for (i, it) in self.iterations.iter().enumerate() {
            if it.t as usize != i + 1 {
                return Err(ModelError::InvalidChain(format!(
                    "iteration index {} at position {}",
                    it.t,
                    i + 1
                )));
            }
            if word_count(&it.description) >= word_limit {
                return Err(ModelError::InvalidChain(format!(
                    "description at t={} is not under the {word_limit}-word limit",
                    it.t
                )));
            }
            if let Some(s) = it.similarity {
                if !(-1.0..=1.0).contains(&s) {
                    return Err(ModelError::InvalidChain(format!(
                        "similarity {s} at t={} out of range",
                        it.t
                    )));
                }
                if it.embedding.is_none() || self.seed_embedding.is_none() {
                    return Err(ModelError::InvalidChain(format!(
                        "similarity at t={} without both embeddings",
                        it.t
                    )));
                }
            }
        }
        let all_scored =
            self.iterations.len() == t_max as usize && self.similarities().is_some();
        if self.gc_at_t.is_some() != all_scored {
            return Err(ModelError::InvalidChain(
                "gc_at_t must be present exactly when all T similarities are".into(),
            ));
        }
        if self.status.is_complete() && self.gc_at_t.is_none() {
            return Err(ModelError::InvalidChain("complete chain without gc_at_t".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seed() -> SeedSample {
        SeedSample {
            id: "existence/0001".into(),
            category: "existence".into(),
            image_ref: "seeds/existence/0001.png".into(),
        }
    }

    fn iteration(t: u32, s: Option<f64>) -> IterationRecord {
        IterationRecord {
            t,
            description: format!("desc {t}"),
            gen_prompt: format!("prompt {t}"),
            image_ref: format!("samples/x/iter{t}/image.png"),
            image_sha256: "00".repeat(32),
            embedding: s.map(|_| EmbeddingVector::new(vec![1.0, 0.0], "enc").unwrap()),
            similarity: s,
            truncated: false,
        }
    }

    #[test]
    fn embedding_rejects_non_finite_and_empty() {
        assert!(EmbeddingVector::new(vec![], "e").is_err());
        assert!(EmbeddingVector::new(vec![1.0, f64::NAN], "e").is_err());
        assert!(EmbeddingVector::new(vec![1.0, f64::INFINITY], "e").is_err());
    }

    #[test]
    fn embedding_dim_checked_on_deserialize() {
        let bad = r#"{"values":[1.0,2.0],"dim":3,"encoder_id":"e"}"#;
        assert!(serde_json::from_str::<EmbeddingVector>(bad).is_err());
    }

    #[test]
    fn gap_in_iterations_is_invalid() {
        let mut chain = ChainRecord::pending(seed());
        chain.seed_embedding = Some(EmbeddingVector::new(vec![1.0, 0.0], "enc").unwrap());
        chain.iterations = vec![iteration(1, Some(0.5)), iteration(3, Some(0.4))];
        assert!(chain.check(3, 500).is_err());
    }

    #[test]
    fn gc_presence_tracks_similarities() {
        let mut chain = ChainRecord::pending(seed());
        chain.seed_embedding = Some(EmbeddingVector::new(vec![1.0, 0.0], "enc").unwrap());
        chain.iterations = vec![iteration(1, Some(0.5)), iteration(2, Some(0.4))];
        assert!(chain.check(2, 500).is_err());
        chain.gc_at_t = Some(0.43);
        chain.status = ChainStatus::Complete;
        chain.check(2, 500).unwrap();
        assert!(chain.check(3, 500).is_err());
    }

    #[test]
    fn similarity_requires_seed_embedding() {
        let mut chain = ChainRecord::pending(seed());
        chain.iterations = vec![iteration(1, Some(0.5))];
        chain.gc_at_t = Some(0.5);
        assert!(chain.check(1, 500).is_err());
    }

    fn arb_chain() -> impl Strategy<Value = ChainRecord> {
        (
            proptest::collection::vec(-1.0f64..=1.0, 0..5),
            proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..6),
            "[a-z ]{0,40}",
            any::<bool>(),
        )
            .prop_map(|(sims, emb, text, fail)| {
                let mut chain = ChainRecord::pending(seed());
                chain.seed_embedding = Some(EmbeddingVector::new(emb.clone(), "enc").unwrap());
                for (i, s) in sims.iter().enumerate() {
                    let mut it = iteration(i as u32 + 1, Some(*s));
                    it.description = text.clone();
                    it.embedding = Some(EmbeddingVector::new(emb.clone(), "enc").unwrap());
                    chain.iterations.push(it);
                }
                chain.gc_at_t = sims.first().copied();
                chain.status = if fail {
                    ChainStatus::Failed("boom\nline".into())
                } else {
                    ChainStatus::InProgress
                };
                chain
            })
    }

    proptest! {
        #[test]
        fn chain_json_round_trip_is_exact(chain in arb_chain()) {
            let json = serde_json::to_string(&chain).unwrap();
            let back: ChainRecord = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, chain);
        }
    }
}
