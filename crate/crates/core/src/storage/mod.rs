//! Durable run directories, the content-addressed response cache, and chain
//! export.
//!
//! Layout under a store root:
//!
//! ```text
//! runs/<run_id>/manifest.json
//! runs/<run_id>/samples/<sample_id>/seed/{image.<ext>, embedding.bin}
//! runs/<run_id>/samples/<sample_id>/iter<t>/{description.txt, gen_prompt.txt, image.png, embedding.bin}
//! cache/<key[0..2]>/<key>
//! sessions/<session_id>.json
//! ```
//!
//! The manifest is rewritten atomically (temp file, then rename) after the
//! artifacts it references are on disk, so a reader never sees a manifest
//! pointing at missing files.

mod cache;
pub mod embedding;

pub use cache::CacheKey;

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_hex;
use crate::imaging;
use crate::model::{
    ChainRecord, ChainStatus, EmbeddingVector, IterationRecord, RunConfig, SampleId, SeedSample,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("unknown run `{0}`")]
    UnknownRun(String),
    #[error("run `{0}` already exists")]
    RunExists(String),
    #[error("unknown sample `{0}` in run")]
    UnknownSample(SampleId),
    #[error("invalid sample id `{id}`: {reason}")]
    InvalidSampleId { id: String, reason: String },
    #[error("sample {sample}: expected iteration {expected}, got {got}")]
    OutOfOrder {
        sample: SampleId,
        expected: u32,
        got: u32,
    },
    #[error("sample {sample}: iteration {t} was already persisted with different content")]
    Conflict { sample: SampleId, t: u32 },
    #[error("sample {sample}: {reason}")]
    InvalidRecord { sample: SampleId, reason: String },
    #[error("run `{0}`: stored config does not match its hash")]
    ConfigHashMismatch(String),
    #[error("{path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StorageError + '_ {
    move |source| StorageError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read(path: &Path) -> Result<Vec<u8>, StorageError> {
    fs::read(path).map_err(io_err(path))
}

fn read_text(path: &Path) -> Result<String, StorageError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Writes via a sibling temp file and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StorageError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, StorageError> {
    let bytes = read(path)?;
    serde_json::from_slice(&bytes).map_err(|source| StorageError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StorageError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("storage types serialize");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Sample ids become relative paths, so each `/`-separated segment must be a
/// plain file name.
pub fn check_sample_id(id: &SampleId) -> Result<(), StorageError> {
    let bad = |reason: &str| {
        Err(StorageError::InvalidSampleId {
            id: id.to_string(),
            reason: reason.into(),
        })
    };
    if id.as_str().is_empty() {
        return bad("empty");
    }
    for seg in id.as_str().split('/') {
        if seg.is_empty() || seg == "." || seg == ".." {
            return bad("empty or relative path segment");
        }
        if seg.chars().any(|c| c == '\\' || c == ':' || c.is_control()) {
            return bad("segment contains a path-unsafe character");
        }
    }
    Ok(())
}

/// Relative artifact paths inside a run directory.
pub mod layout {
    use crate::model::SampleId;

    pub fn sample_dir(sample: &SampleId) -> String {
        format!("samples/{sample}")
    }

    pub fn seed_image(sample: &SampleId, ext: &str) -> String {
        format!("samples/{sample}/seed/image.{ext}")
    }

    pub fn seed_embedding(sample: &SampleId) -> String {
        format!("samples/{sample}/seed/embedding.bin")
    }

    pub fn iteration_dir(sample: &SampleId, t: u32) -> String {
        format!("samples/{sample}/iter{t}")
    }

    pub fn iteration_image(sample: &SampleId, t: u32) -> String {
        format!("{}/image.png", iteration_dir(sample, t))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "reason", rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Complete,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingRef {
    pub path: String,
    pub encoder_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationEntry {
    pub t: u32,
    pub description: String,
    pub gen_prompt: String,
    pub image: String,
    pub image_sha256: String,
    pub embedding: Option<EmbeddingRef>,
    pub similarity: Option<f64>,
    pub truncated: bool,
}

/// Per-sample chain index. `iteration_count` and `similarities` are derived
/// from `iterations` and kept for readers that only want the scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub seed: SeedSample,
    pub status: ChainStatus,
    pub seed_image: Option<String>,
    pub seed_sha256: Option<String>,
    pub seed_embedding: Option<EmbeddingRef>,
    pub iteration_count: u32,
    pub iterations: Vec<IterationEntry>,
    pub similarities: Vec<f64>,
    pub gc_at_t: Option<f64>,
}

impl SampleEntry {
    fn new(seed: SeedSample) -> Self {
        Self {
            seed,
            status: ChainStatus::Pending,
            seed_image: None,
            seed_sha256: None,
            seed_embedding: None,
            iteration_count: 0,
            iterations: Vec::new(),
            similarities: Vec::new(),
            gc_at_t: None,
        }
    }

    fn refresh_derived(&mut self) {
        self.iteration_count = self.iterations.len() as u32;
        self.similarities = self.iterations.iter().filter_map(|i| i.similarity).collect();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub run_id: String,
    /// RFC 3339 creation time.
    pub created_at: String,
    pub config: RunConfig,
    pub config_hash: String,
    /// Role → backend id.
    pub backends: BTreeMap<String, String>,
    pub status: RunStatus,
    pub samples: BTreeMap<SampleId, SampleEntry>,
}

/// A run as loaded from disk: manifest metadata plus full chain records.
#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    pub run_id: String,
    pub created_at: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub backends: BTreeMap<String, String>,
    pub status: RunStatus,
    /// Ordered by sample id.
    pub chains: Vec<ChainRecord>,
}

impl RunState {
    pub fn chain(&self, id: &SampleId) -> Option<&ChainRecord> {
        self.chains.iter().find(|c| &c.seed.id == id)
    }

    pub fn complete_chains(&self) -> impl Iterator<Item = &ChainRecord> {
        self.chains.iter().filter(|c| c.status.is_complete())
    }

    pub fn failed_chains(&self) -> impl Iterator<Item = &ChainRecord> {
        self.chains.iter().filter(|c| c.status.is_failed())
    }
}

/// One image of an exported chain; `t = 0` is the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleImage {
    pub t: u32,
    pub path: String,
    pub sha256: String,
    /// `None` when the file was missing at export time.
    #[serde(skip)]
    pub bytes: Option<Vec<u8>>,
}

/// Self-contained copy of one chain: seed plus every generated image, the
/// descriptions and the scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainBundle {
    pub run_id: String,
    /// Configured number of iterations T.
    pub iterations: u32,
    pub chain: ChainRecord,
    pub images: Vec<BundleImage>,
}

impl ChainBundle {
    /// Writes `bundle.json` and the images under `dir/images/`.
    pub fn write_to(&self, dir: &Path) -> Result<(), StorageError> {
        let mut copy = self.clone();
        for img in &mut copy.images {
            if let Some(bytes) = &img.bytes {
                let name = format!("images/{}.{}", img.t, imaging::extension(bytes));
                write_atomic(&dir.join(&name), bytes)?;
                img.path = name;
            }
        }
        write_json(&dir.join("bundle.json"), &copy)
    }
}

/// A store root holding runs, the response cache and annotation sessions.
#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

impl RunStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.root.join("runs").join(run_id)
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.root.join("cache")
    }

    pub fn sessions_dir(&self) -> PathBuf {
        self.root.join("sessions")
    }

    /// `<UTC timestamp>-<config hash prefix>`, with a numeric suffix if taken.
    pub fn new_run_id(&self, config: &RunConfig) -> String {
        let base = format!(
            "{}-{}",
            chrono::Utc::now().format("%Y%m%dT%H%M%SZ"),
            &config.hash()[..8]
        );
        let mut id = base.clone();
        let mut n = 2;
        while self.run_dir(&id).exists() {
            id = format!("{base}-{n}");
            n += 1;
        }
        id
    }

    pub fn list_runs(&self) -> Result<Vec<String>, StorageError> {
        let dir = self.root.join("runs");
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut ids = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let entry = entry.map_err(io_err(&dir))?;
            if entry.path().join(MANIFEST_FILE).exists() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn create_run(
        &self,
        run_id: &str,
        config: &RunConfig,
        backends: BTreeMap<String, String>,
        seeds: &[SeedSample],
    ) -> Result<RunHandle, StorageError> {
        let dir = self.run_dir(run_id);
        if dir.join(MANIFEST_FILE).exists() {
            return Err(StorageError::RunExists(run_id.into()));
        }
        let mut samples = BTreeMap::new();
        for seed in seeds {
            check_sample_id(&seed.id)?;
            samples.insert(seed.id.clone(), SampleEntry::new(seed.clone()));
        }
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            run_id: run_id.into(),
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            config: config.clone(),
            config_hash: config.hash(),
            backends,
            status: RunStatus::Running,
            samples,
        };
        let handle = RunHandle { dir, manifest };
        handle.save()?;
        Ok(handle)
    }

    pub fn open_run(&self, run_id: &str) -> Result<RunHandle, StorageError> {
        let dir = self.run_dir(run_id);
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Err(StorageError::UnknownRun(run_id.into()));
        }
        let manifest: RunManifest = read_json(&path)?;
        if manifest.config.hash() != manifest.config_hash {
            return Err(StorageError::ConfigHashMismatch(run_id.into()));
        }
        Ok(RunHandle { dir, manifest })
    }

    pub fn load_run(&self, run_id: &str) -> Result<RunState, StorageError> {
        self.open_run(run_id)?.state()
    }

    pub fn cache_lookup(&self, key: &CacheKey) -> Option<Vec<u8>> {
        fs::read(key.path(&self.cache_dir())).ok()
    }

    pub fn cache_store(&self, key: &CacheKey, bytes: &[u8]) -> Result<(), StorageError> {
        write_atomic(&key.path(&self.cache_dir()), bytes)
    }

    /// Collects a chain with its T+1 images (fewer for unfinished chains).
    pub fn export_chain(&self, run_id: &str, sample: &SampleId) -> Result<ChainBundle, StorageError> {
        let handle = self.open_run(run_id)?;
        let entry = handle
            .manifest
            .samples
            .get(sample)
            .ok_or_else(|| StorageError::UnknownSample(sample.clone()))?;
        let chain = handle.chain(entry, false)?;
        let mut images = Vec::new();
        let mut push = |t: u32, path: &str, sha: &str| {
            let bytes = fs::read(handle.dir.join(path)).ok();
            if bytes.is_none() {
                tracing::warn!(run_id, %sample, path, "image missing from run directory");
            }
            images.push(BundleImage {
                t,
                path: path.into(),
                sha256: sha.into(),
                bytes,
            });
        };
        if let (Some(path), Some(sha)) = (&entry.seed_image, &entry.seed_sha256) {
            push(0, path, sha);
        }
        for it in &entry.iterations {
            push(it.t, &it.image, &it.image_sha256);
        }
        Ok(ChainBundle {
            run_id: run_id.into(),
            iterations: handle.manifest.config.iterations,
            chain,
            images,
        })
    }

    /// Stores an auxiliary JSON document (e.g. FID results) next to the manifest.
    pub fn write_run_json<T: Serialize>(&self, run_id: &str, name: &str, value: &T) -> Result<(), StorageError> {
        let dir = self.run_dir(run_id);
        if !dir.join(MANIFEST_FILE).exists() {
            return Err(StorageError::UnknownRun(run_id.into()));
        }
        write_json(&dir.join(name), value)
    }

    pub fn read_run_json<T: serde::de::DeserializeOwned>(&self, run_id: &str, name: &str) -> Result<Option<T>, StorageError> {
        let path = self.run_dir(run_id).join(name);
        if !path.exists() {
            return Ok(None);
        }
        read_json(&path).map(Some)
    }

    pub fn write_json<T: Serialize>(&self, path: &Path, value: &T) -> Result<(), StorageError> {
        write_json(path, value)
    }

    pub fn read_json<T: serde::de::DeserializeOwned>(&self, path: &Path) -> Result<T, StorageError> {
        read_json(path)
    }
}

/// Writer for one run. Callers serialize access to it; artifact files of
/// different samples never overlap.
#[derive(Debug)]
pub struct RunHandle {
    dir: PathBuf,
    manifest: RunManifest,
}

impl RunHandle {
    pub fn run_id(&self) -> &str {
        &self.manifest.run_id
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    fn save(&self) -> Result<(), StorageError> {
        write_json(&self.dir.join(MANIFEST_FILE), &self.manifest)
    }

    fn entry_mut(&mut self, sample: &SampleId) -> Result<&mut SampleEntry, StorageError> {
        self.manifest
            .samples
            .get_mut(sample)
            .ok_or_else(|| StorageError::UnknownSample(sample.clone()))
    }

    fn write_embedding(&self, rel: &str, e: &EmbeddingVector) -> Result<EmbeddingRef, StorageError> {
        write_atomic(&self.dir.join(rel), &embedding::encode(e))?;
        Ok(EmbeddingRef {
            path: rel.into(),
            encoder_id: e.encoder_id().into(),
        })
    }

    /// Copies X^(0) into the run and stores its embedding.
    pub fn persist_seed(
        &mut self,
        sample: &SampleId,
        image: &[u8],
        emb: &EmbeddingVector,
    ) -> Result<(), StorageError> {
        self.entry_mut(sample)?;
        let image_rel = layout::seed_image(sample, imaging::extension(image));
        write_atomic(&self.dir.join(&image_rel), image)?;
        let emb_ref = self.write_embedding(&layout::seed_embedding(sample), emb)?;
        let entry = self.entry_mut(sample)?;
        entry.seed_image = Some(image_rel);
        entry.seed_sha256 = Some(sha256_hex(image));
        entry.seed_embedding = Some(emb_ref);
        if entry.status == ChainStatus::Pending {
            entry.status = ChainStatus::InProgress;
        }
        self.save()
    }

    /// Writes the artifacts of iteration `record.t`, then the manifest.
    ///
    /// `t` must follow the last persisted iteration. Re-persisting an already
    /// stored iteration with identical content is a no-op.
    pub fn persist_iteration(
        &mut self,
        sample: &SampleId,
        record: &IterationRecord,
        image: &[u8],
    ) -> Result<(), StorageError> {
        let invalid = |reason: String| StorageError::InvalidRecord {
            sample: sample.clone(),
            reason,
        };
        let t = record.t;
        if record.image_ref != layout::iteration_image(sample, t) {
            return Err(invalid(format!("image_ref `{}` is not the canonical path", record.image_ref)));
        }
        if sha256_hex(image) != record.image_sha256 {
            return Err(invalid("image bytes do not match image_sha256".into()));
        }
        let persisted = self.entry_mut(sample)?.iterations.len() as u32;
        if t == 0 || t > persisted + 1 {
            return Err(StorageError::OutOfOrder {
                sample: sample.clone(),
                expected: persisted + 1,
                got: t,
            });
        }
        if t <= persisted {
            let existing = self.iteration_record(sample, t)?;
            return if &existing == record {
                Ok(())
            } else {
                Err(StorageError::Conflict {
                    sample: sample.clone(),
                    t,
                })
            };
        }

        let dir = layout::iteration_dir(sample, t);
        let desc_rel = format!("{dir}/description.txt");
        let prompt_rel = format!("{dir}/gen_prompt.txt");
        write_atomic(&self.dir.join(&desc_rel), record.description.as_bytes())?;
        write_atomic(&self.dir.join(&prompt_rel), record.gen_prompt.as_bytes())?;
        write_atomic(&self.dir.join(&record.image_ref), image)?;
        let emb_ref = match &record.embedding {
            Some(e) => Some(self.write_embedding(&format!("{dir}/embedding.bin"), e)?),
            None => None,
        };
        let entry = self.entry_mut(sample)?;
        entry.iterations.push(IterationEntry {
            t,
            description: desc_rel,
            gen_prompt: prompt_rel,
            image: record.image_ref.clone(),
            image_sha256: record.image_sha256.clone(),
            embedding: emb_ref,
            similarity: record.similarity,
            truncated: record.truncated,
        });
        entry.refresh_derived();
        entry.status = ChainStatus::InProgress;
        self.save()
    }

    pub fn set_chain_status(
        &mut self,
        sample: &SampleId,
        status: ChainStatus,
        gc_at_t: Option<f64>,
    ) -> Result<(), StorageError> {
        let entry = self.entry_mut(sample)?;
        entry.status = status;
        entry.gc_at_t = gc_at_t;
        self.save()
    }

    pub fn set_run_status(&mut self, status: RunStatus) -> Result<(), StorageError> {
        self.manifest.status = status;
        self.save()
    }

    fn load_embedding(&self, r: &EmbeddingRef) -> Result<EmbeddingVector, StorageError> {
        let path = self.dir.join(&r.path);
        embedding::decode(&read(&path)?, &r.encoder_id)
            .map_err(|reason| StorageError::Corrupt { path, reason })
    }

    fn iteration_from_entry(&self, it: &IterationEntry, require_image: bool) -> Result<IterationRecord, StorageError> {
        let image = self.dir.join(&it.image);
        if require_image && !image.exists() {
            return Err(StorageError::Corrupt {
                path: image,
                reason: "referenced image is missing".into(),
            });
        }
        Ok(IterationRecord {
            t: it.t,
            description: read_text(&self.dir.join(&it.description))?,
            gen_prompt: read_text(&self.dir.join(&it.gen_prompt))?,
            image_ref: it.image.clone(),
            image_sha256: it.image_sha256.clone(),
            embedding: it.embedding.as_ref().map(|r| self.load_embedding(r)).transpose()?,
            similarity: it.similarity,
            truncated: it.truncated,
        })
    }

    fn iteration_record(&self, sample: &SampleId, t: u32) -> Result<IterationRecord, StorageError> {
        let entry = self
            .manifest
            .samples
            .get(sample)
            .ok_or_else(|| StorageError::UnknownSample(sample.clone()))?;
        self.iteration_from_entry(&entry.iterations[t as usize - 1], true)
    }

    /// Exports pass `require_images = false` so missing files become placeholders.
    fn chain(&self, entry: &SampleEntry, require_images: bool) -> Result<ChainRecord, StorageError> {
        Ok(ChainRecord {
            seed: entry.seed.clone(),
            seed_embedding: entry
                .seed_embedding
                .as_ref()
                .map(|r| self.load_embedding(r))
                .transpose()?,
            iterations: entry
                .iterations
                .iter()
                .map(|it| self.iteration_from_entry(it, require_images))
                .collect::<Result<_, _>>()?,
            gc_at_t: entry.gc_at_t,
            status: entry.status.clone(),
        })
    }

    /// Seed image bytes as copied into the run.
    pub fn seed_image(&self, sample: &SampleId) -> Result<Option<Vec<u8>>, StorageError> {
        let entry = self
            .manifest
            .samples
            .get(sample)
            .ok_or_else(|| StorageError::UnknownSample(sample.clone()))?;
        entry
            .seed_image
            .as_ref()
            .map(|p| read(&self.dir.join(p)))
            .transpose()
    }

    /// Bytes of any artifact referenced by a relative path.
    pub fn read_artifact(&self, rel: &str) -> Result<Vec<u8>, StorageError> {
        read(&self.dir.join(rel))
    }

    pub fn chain_record(&self, sample: &SampleId) -> Result<ChainRecord, StorageError> {
        let entry = self
            .manifest
            .samples
            .get(sample)
            .ok_or_else(|| StorageError::UnknownSample(sample.clone()))?;
        self.chain(entry, true)
    }

    pub fn state(&self) -> Result<RunState, StorageError> {
        let chains = self
            .manifest
            .samples
            .values()
            .map(|e| self.chain(e, true))
            .collect::<Result<_, _>>()?;
        Ok(RunState {
            run_id: self.manifest.run_id.clone(),
            created_at: self.manifest.created_at.clone(),
            config: self.manifest.config.clone(),
            config_hash: self.manifest.config_hash.clone(),
            backends: self.manifest.backends.clone(),
            status: self.manifest.status.clone(),
            chains,
        })
    }
}
