//! Runs describe → generate → embed chains over a dataset and scores them.
//!
//! The per-iteration step ([`Runner::step`]) is shared by model chains and
//! by the annotator server, where a human supplies the description.

mod fid;

pub use fid::{FidReport, FidScope};

use std::collections::BTreeMap;
use std::future::Future;
use std::sync::{Arc, Mutex};

use futures::stream::{self, StreamExt};
use thiserror::Error;

use crate::backends::{
    Backends, BackendError, CallPolicy, Clock, DescriberRequest, EmbedRequest, EmbedResponse,
    GeneratorRequest, Role, SystemClock,
};
use crate::dataset;
use crate::digest::sha256_hex;
use crate::imaging;
use crate::metrics::{self, cosine_similarity, MetricsError, ScoreRow};
use crate::model::{
    word_count, ChainRecord, ChainStatus, EmbeddingVector, IterationRecord, ModelError, RunConfig,
    SampleId, SeedSample, DESCRIPTION_SLOT,
};
use crate::storage::{embedding, layout, CacheKey, RunHandle, RunState, RunStatus, RunStore, StorageError};

/// Reason recorded on a chain whose describer produced no text.
pub const EMPTY_DESCRIPTION: &str = "empty description";

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("{role:?} call failed: {source}")]
    Backend {
        role: Role,
        #[source]
        source: BackendError,
    },
    #[error("{EMPTY_DESCRIPTION}")]
    EmptyDescription,
    #[error("embedding dimension drift for `{encoder_id}`: expected {expected}, got {got}")]
    DimensionDrift {
        encoder_id: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid embedding: {0}")]
    Embedding(String),
    #[error("seed image unreadable: {0}")]
    Seed(String),
    #[error("chain already has all {0} iterations")]
    ChainFull(u32),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Config(#[from] ModelError),
    #[error("run `{run_id}` was created with a different configuration")]
    ConfigMismatch { run_id: String },
    #[error("feature extraction failed: {0}")]
    Features(BackendError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{0}")]
    Invalid(String),
}

/// Fills the description slot of the generation prompt template.
pub fn build_gen_prompt(template: &str, description: &str) -> Result<String, ChainError> {
    if description.trim().is_empty() {
        return Err(ChainError::EmptyDescription);
    }
    Ok(template.replacen(DESCRIPTION_SLOT, description, 1))
}

/// The describer request for X^(t-1) under `config`.
pub fn build_desc_request(config: &RunConfig, image: Vec<u8>) -> Result<DescriberRequest, BackendError> {
    DescriberRequest::new(
        config.desc_prompt.clone(),
        image,
        config.temperature,
        config.max_tokens,
    )
}

/// Keeps descriptions strictly under `limit` whitespace-delimited words.
///
/// Text already under the limit is returned unchanged. Otherwise the first
/// `limit - 1` words are joined with single spaces and `truncated` is set.
pub fn enforce_word_limit(description: &str, limit: usize) -> (String, bool) {
    assert!(limit >= 1, "word limit must be at least 1");
    if word_count(description) < limit {
        return (description.to_string(), false);
    }
    let kept: Vec<&str> = description.split_whitespace().take(limit - 1).collect();
    (kept.join(" "), true)
}

/// Per-sample GC@T of the complete chains, aggregated over the categories.
pub fn gc_score_row(state: &RunState) -> Result<ScoreRow, MetricsError> {
    let mut per_sample = BTreeMap::new();
    let mut categories = BTreeMap::new();
    for chain in state.complete_chains() {
        let gc = chain.gc_at_t.ok_or(MetricsError::EmptySeries)?;
        per_sample.insert(chain.seed.id.clone(), gc);
        categories.insert(chain.seed.id.clone(), chain.seed.category.clone());
    }
    metrics::aggregate(&per_sample, &categories, &state.config.categories)
}

/// Executes chains for one configuration and backend set.
pub struct Runner {
    config: RunConfig,
    backends: Backends,
    store: RunStore,
    describe_policy: CallPolicy,
    generate_policy: CallPolicy,
    embed_policy: CallPolicy,
    features_policy: CallPolicy,
    embed_dim: Mutex<Option<(String, usize)>>,
}

/// Run handle shared by the chains of one run; the single writer of its manifest.
pub type SharedHandle = Arc<Mutex<RunHandle>>;

impl Runner {
    pub fn new(config: RunConfig, backends: Backends, store: RunStore) -> Self {
        Self::with_clock(config, backends, store, Arc::new(SystemClock::default()))
    }

    /// Uses `clock` for backoff and rate limiting (tests pass a manual clock).
    pub fn with_clock(config: RunConfig, backends: Backends, store: RunStore, clock: Arc<dyn Clock>) -> Self {
        let policy = || CallPolicy::new(config.retry.clone(), config.requests_per_minute, clock.clone());
        Self {
            describe_policy: policy(),
            generate_policy: policy(),
            embed_policy: policy(),
            features_policy: policy(),
            config,
            backends,
            store,
            embed_dim: Mutex::new(None),
        }
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn backends(&self) -> &Backends {
        &self.backends
    }

    pub fn store(&self) -> &RunStore {
        &self.store
    }

    async fn cached<F, Fut>(&self, key: CacheKey, call: F) -> Result<Vec<u8>, BackendError>
    where
        F: FnOnce() -> Fut,
        Fut: Future<Output = Result<Vec<u8>, BackendError>>,
    {
        if self.config.cache {
            if let Some(hit) = self.store.cache_lookup(&key) {
                return Ok(hit);
            }
        }
        let bytes = call().await?;
        if self.config.cache {
            if let Err(e) = self.store.cache_store(&key, &bytes) {
                tracing::warn!(error = %e, "could not write cache entry");
            }
        }
        Ok(bytes)
    }

    /// Asks the describer for Q_t given X^(t-1), then applies the word limit.
    pub async fn describe(&self, image: &[u8]) -> Result<(String, bool), ChainError> {
        let backend = |source| ChainError::Backend {
            role: Role::Describe,
            source,
        };
        let req = build_desc_request(&self.config, image.to_vec()).map_err(backend)?;
        let describer = &self.backends.describer;
        let key = CacheKey::new(&describer.id(), &req.prompt, &req.image, req.temperature);
        let bytes = self
            .cached(key, || async {
                let resp = self.describe_policy.run(|| describer.describe(&req)).await?;
                Ok(resp.text.into_bytes())
            })
            .await
            .map_err(backend)?;
        let text = String::from_utf8(bytes)
            .map_err(|_| backend(BackendError::malformed("cached description is not UTF-8")))?;
        Ok(enforce_word_limit(&text, self.config.word_limit))
    }

    async fn generate(&self, prompt: &str) -> Result<Vec<u8>, ChainError> {
        let generator = &self.backends.generator;
        let req = GeneratorRequest {
            prompt: prompt.to_string(),
            temperature: self.config.temperature,
            size: None,
        };
        let key = CacheKey::new(&generator.id(), prompt, &[], req.temperature);
        self.cached(key, || async {
            let resp = self.generate_policy.run(|| generator.generate(&req)).await?;
            imaging::decode_check(&resp.image).map_err(BackendError::malformed)?;
            Ok(resp.image)
        })
        .await
        .map_err(|source| ChainError::Backend {
            role: Role::Generate,
            source,
        })
    }

    /// Embeds an image; values are rounded to the f32 storage precision so
    /// stored and in-memory chains agree exactly.
    pub async fn embed(&self, image: &[u8]) -> Result<EmbeddingVector, ChainError> {
        let embedder = &self.backends.embedder;
        let backend = |source| ChainError::Backend {
            role: Role::Embed,
            source,
        };
        let req = EmbedRequest {
            image: image.to_vec(),
        };
        let key = CacheKey::new(&embedder.id(), "", image, 0.0);
        let bytes = self
            .cached(key, || async {
                let resp = self.embed_policy.run(|| embedder.embed(&req)).await?;
                Ok(serde_json::to_vec(&resp).expect("embed response serializes"))
            })
            .await
            .map_err(backend)?;
        let resp: EmbedResponse = serde_json::from_slice(&bytes)
            .map_err(|e| backend(BackendError::malformed(format!("cached embedding: {e}"))))?;
        {
            let mut dims = self.embed_dim.lock().unwrap();
            match &*dims {
                Some((id, dim)) if *dim != resp.vector.len() => {
                    return Err(ChainError::DimensionDrift {
                        encoder_id: id.clone(),
                        expected: *dim,
                        got: resp.vector.len(),
                    });
                }
                Some(_) => {}
                None => *dims = Some((resp.encoder_id.clone(), resp.vector.len())),
            }
        }
        EmbeddingVector::new(embedding::quantize(&resp.vector), resp.encoder_id)
            .map_err(|e| ChainError::Embedding(e.to_string()))
    }

    fn note_dim(&self, e: &EmbeddingVector) {
        let mut dims = self.embed_dim.lock().unwrap();
        if dims.is_none() {
            *dims = Some((e.encoder_id().to_string(), e.dim()));
        }
    }

    async fn seed_bytes(&self, handle: &SharedHandle, seed: &SeedSample) -> Result<Vec<u8>, ChainError> {
        let stored = handle.lock().unwrap().seed_image(&seed.id)?;
        let bytes = match stored {
            Some(b) => b,
            None => dataset::read_image(seed).map_err(|e| ChainError::Seed(format!("{}: {e}", seed.image_ref)))?,
        };
        imaging::decode_check(&bytes).map_err(ChainError::Seed)?;
        self.backends.register_seed(&bytes);
        Ok(bytes)
    }

    /// Embeds and stores X^(0) if that has not happened yet.
    pub async fn start_chain(&self, handle: &SharedHandle, chain: &mut ChainRecord) -> Result<(), ChainError> {
        let seed = self.seed_bytes(handle, &chain.seed).await?;
        if chain.seed_embedding.is_none() {
            let emb = self.embed(&seed).await?;
            handle.lock().unwrap().persist_seed(&chain.seed.id, &seed, &emb)?;
            chain.seed_embedding = Some(emb);
        }
        if chain.status == ChainStatus::Pending || chain.status.is_failed() {
            chain.status = ChainStatus::InProgress;
            handle
                .lock()
                .unwrap()
                .set_chain_status(&chain.seed.id, ChainStatus::InProgress, None)?;
        }
        Ok(())
    }

    /// X^(t-1) for the next iteration of `chain`.
    pub async fn current_image(&self, handle: &SharedHandle, chain: &ChainRecord) -> Result<Vec<u8>, ChainError> {
        match chain.iterations.last() {
            None => self.seed_bytes(handle, &chain.seed).await,
            Some(it) => Ok(handle.lock().unwrap().read_artifact(&it.image_ref)?),
        }
    }

    /// One iteration given Q_t: build the generation prompt, generate X^(t),
    /// embed it, score it against the seed and persist everything.
    ///
    /// Returns the bytes of X^(t).
    pub async fn step(
        &self,
        handle: &SharedHandle,
        chain: &mut ChainRecord,
        description: String,
        truncated: bool,
    ) -> Result<Vec<u8>, ChainError> {
        let t = chain.next_t();
        if t > self.config.iterations {
            return Err(ChainError::ChainFull(self.config.iterations));
        }
        let gen_prompt = build_gen_prompt(&self.config.gen_prompt_template, &description)?;
        let image = self.generate(&gen_prompt).await?;
        let emb = self.embed(&image).await?;
        let seed_emb = chain
            .seed_embedding
            .as_ref()
            .ok_or_else(|| ChainError::Embedding("seed embedding missing".into()))?;
        let similarity = cosine_similarity(seed_emb, &emb)?;
        let record = IterationRecord {
            t,
            description,
            gen_prompt,
            image_ref: layout::iteration_image(&chain.seed.id, t),
            image_sha256: sha256_hex(&image),
            embedding: Some(emb),
            similarity: Some(similarity),
            truncated,
        };
        handle
            .lock()
            .unwrap()
            .persist_iteration(&chain.seed.id, &record, &image)?;
        chain.iterations.push(record);
        Ok(image)
    }

    /// Marks the chain complete with its GC@T once all T iterations exist.
    pub fn finish_chain(&self, handle: &SharedHandle, chain: &mut ChainRecord) -> Result<bool, ChainError> {
        if chain.iterations.len() < self.config.iterations as usize {
            return Ok(false);
        }
        let sims = chain
            .similarities()
            .ok_or_else(|| ChainError::Embedding("iteration without similarity".into()))?;
        let gc = metrics::gc_at_t(&sims)?;
        handle
            .lock()
            .unwrap()
            .set_chain_status(&chain.seed.id, ChainStatus::Complete, Some(gc))?;
        chain.gc_at_t = Some(gc);
        chain.status = ChainStatus::Complete;
        Ok(true)
    }

    async fn advance(&self, handle: &SharedHandle, chain: &mut ChainRecord) -> Result<(), ChainError> {
        self.start_chain(handle, chain).await?;
        let mut current = self.current_image(handle, chain).await?;
        while chain.next_t() <= self.config.iterations {
            let (description, truncated) = self.describe(&current).await?;
            if truncated {
                tracing::info!(sample = %chain.seed.id, t = chain.next_t(), "description truncated to word limit");
            }
            current = self.step(handle, chain, description, truncated).await?;
        }
        self.finish_chain(handle, chain)?;
        Ok(())
    }

    /// Runs the remaining iterations of one chain. Failures are recorded on
    /// the returned chain rather than propagated; completed iterations stay
    /// on disk.
    pub async fn run_chain(&self, handle: &SharedHandle, mut chain: ChainRecord) -> ChainRecord {
        if chain.status.is_complete() {
            return chain;
        }
        if let Err(e) = self.advance(handle, &mut chain).await {
            let reason = e.to_string();
            tracing::warn!(sample = %chain.seed.id, t = chain.next_t(), %reason, "chain failed");
            chain.status = ChainStatus::Failed(reason.clone());
            if let Err(e) = handle
                .lock()
                .unwrap()
                .set_chain_status(&chain.seed.id, ChainStatus::Failed(reason), None)
            {
                tracing::error!(sample = %chain.seed.id, error = %e, "could not record chain failure");
            }
        }
        chain
    }

    /// Creates a new run for `seeds` and returns its id without executing it.
    pub fn create_run(&self, seeds: &[SeedSample]) -> Result<String, OrchestratorError> {
        self.config.validate()?;
        let run_id = self.store.new_run_id(&self.config);
        let backends = self.backends.identities().into_iter().collect();
        self.store.create_run(&run_id, &self.config, backends, seeds)?;
        Ok(run_id)
    }

    /// Creates and executes a run over `seeds`.
    pub async fn run_dataset(&self, seeds: &[SeedSample]) -> Result<RunState, OrchestratorError> {
        let run_id = self.create_run(seeds)?;
        self.execute(&run_id).await
    }

    /// Continues a run: finished chains are skipped, and iterations already on
    /// disk are never requested again.
    pub async fn resume(&self, run_id: &str) -> Result<RunState, OrchestratorError> {
        self.execute(run_id).await
    }

    /// Runs every unfinished chain of `run_id`, at most `parallelism` at a time.
    pub async fn execute(&self, run_id: &str) -> Result<RunState, OrchestratorError> {
        let handle = self.store.open_run(run_id)?;
        if handle.manifest().config_hash != self.config.hash() {
            return Err(OrchestratorError::ConfigMismatch {
                run_id: run_id.into(),
            });
        }
        let state = handle.state()?;
        for emb in state
            .chains
            .iter()
            .filter_map(|c| c.seed_embedding.as_ref())
            .take(1)
        {
            self.note_dim(emb);
        }
        let handle: SharedHandle = Arc::new(Mutex::new(handle));
        let pending: Vec<ChainRecord> = state
            .chains
            .into_iter()
            .filter(|c| !c.status.is_complete())
            .collect();
        tracing::info!(run_id, chains = pending.len(), "executing chains");
        let parallelism = self.config.parallelism.max(1);
        let _finished: Vec<ChainRecord> = stream::iter(pending)
            .map(|chain| self.run_chain(&handle, chain))
            .buffer_unordered(parallelism)
            .collect()
            .await;

        let mut handle = handle.lock().unwrap();
        let state = handle.state()?;
        let complete = state.complete_chains().count();
        let status = if state.chains.is_empty() || complete == 0 {
            RunStatus::Failed("all chains failed".into())
        } else {
            RunStatus::Complete
        };
        handle.set_run_status(status)?;
        Ok(handle.state()?)
    }

    /// Identifiers of chains in `state` that did not complete, with reasons.
    pub fn failures(state: &RunState) -> Vec<(SampleId, String)> {
        state
            .chains
            .iter()
            .filter_map(|c| match &c.status {
                ChainStatus::Failed(r) => Some((c.seed.id.clone(), r.clone())),
                _ => None,
            })
            .collect()
    }
}
