//! Annotator server: a person takes the describer's place in the loop.
//!
//! Every session is an ordinary run whose describer is recorded as
//! `human:<annotator>`. Submissions go through the same
//! [`Runner::step`] as model chains, so human and model GC@T come from the
//! same generator, embedder and prompt template. Session metadata lives in
//! `<root>/sessions/<id>.json` and loop state in the run itself, so sessions
//! survive a restart.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::Context;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use genception::backends::mock::HumanDescriber;
use genception::backends::{build_backends, Backends};
use genception::dataset;
use genception::imaging;
use genception::metrics::gc_at_t;
use genception::model::{word_count, ChainRecord, RunConfig, SampleId, SeedSample};
use genception::orchestrator::{ChainError, Runner, SharedHandle};
use genception::report::{render_chain_strip, StripFormat};
use genception::storage::{RunStore, StorageError};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::config::{self, ConfigFlags};
use crate::InvalidInput;

pub const DEFAULT_PER_CATEGORY: usize = 5;

/// Describer id stored in the config of annotator runs.
pub const HUMAN_DESCRIBER: &str = "human";

/// Persisted session metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub annotator_id: String,
    pub run_id: String,
    /// Presentation order.
    pub samples: Vec<SampleId>,
    pub word_limit: usize,
    pub iterations: u32,
}

struct Session {
    record: SessionRecord,
    runner: Runner,
    handle: SharedHandle,
}

struct Shared {
    store: RunStore,
    config: RunConfig,
    backends: Backends,
    pool: Vec<SeedSample>,
    per_category: usize,
    assignment_seed: u64,
    sessions: Mutex<HashMap<String, Arc<tokio::sync::Mutex<Session>>>>,
    create: tokio::sync::Mutex<()>,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    /// `config.describer` is replaced with [`HUMAN_DESCRIBER`]; `pool` is the
    /// set sessions draw their samples from.
    pub fn new(
        root: impl Into<PathBuf>,
        mut config: RunConfig,
        backends: Backends,
        pool: Vec<SeedSample>,
        per_category: usize,
        assignment_seed: u64,
    ) -> Self {
        config.describer = HUMAN_DESCRIBER.into();
        Self(Arc::new(Shared {
            store: RunStore::new(root),
            config,
            backends,
            pool,
            per_category,
            assignment_seed,
            sessions: Mutex::new(HashMap::new()),
            create: tokio::sync::Mutex::new(()),
        }))
    }

    /// Resolves config and dataset the way `run` does. Without an explicit
    /// `iterations`, sessions use T = 1.
    pub fn from_config(
        root: &Path,
        config_file: Option<&Path>,
        flags: &ConfigFlags,
        per_category: usize,
        assignment_seed: u64,
    ) -> anyhow::Result<Self> {
        let resolved = config::resolve(config_file, flags)?;
        let mut config = resolved.config;
        if !resolved.explicit_iterations {
            config.iterations = 1;
        }
        config.describer = HUMAN_DESCRIBER.into();
        let (pool, report) = dataset::validate(&config.dataset, &config.categories)
            .map_err(|e| InvalidInput(e.to_string()))?;
        if report.empty || !report.is_valid() {
            return Err(InvalidInput(format!(
                "dataset {} is not usable ({} samples, {} violations)",
                config.dataset.display(),
                report.samples,
                report.violations.len()
            ))
            .into());
        }
        if per_category == 0 {
            return Err(InvalidInput("--per-category must be at least 1".into()).into());
        }
        let backends = build_backends(&config).map_err(|e| InvalidInput(e.to_string()))?;
        Ok(Self::new(root, config, backends, pool, per_category, assignment_seed))
    }

    pub fn store(&self) -> &RunStore {
        &self.0.store
    }

    pub fn config(&self) -> &RunConfig {
        &self.0.config
    }
}

/// Samples for the `index`-th session: per category, a window of
/// `per_category` consecutive images of a seeded shuffle, the window moving
/// by `per_category` with every session. Consecutive sessions therefore get
/// disjoint images until a category runs out and wraps around.
pub fn assign(
    pool: &[SeedSample],
    config: &RunConfig,
    per_category: usize,
    seed: u64,
    index: usize,
) -> Vec<SeedSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for category in config.categories.categories() {
        let mut members: Vec<&SeedSample> = pool.iter().filter(|s| &s.category == category).collect();
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        let take = per_category.min(members.len());
        for j in 0..take {
            out.push(members[(index * per_category + j) % members.len()].clone());
        }
    }
    out
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    retryable: bool,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            retryable: false,
        }
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        tracing::error!(error = %e, "annotator request failed");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl From<StorageError> for ApiError {
    fn from(e: StorageError) -> Self {
        match e {
            StorageError::UnknownRun(_) | StorageError::UnknownSample(_) => Self::new(StatusCode::NOT_FOUND, e.to_string()),
            e => Self::internal(e),
        }
    }
}

impl From<ChainError> for ApiError {
    fn from(e: ChainError) -> Self {
        match e {
            ChainError::Backend { .. } => Self {
                status: StatusCode::BAD_GATEWAY,
                message: e.to_string(),
                retryable: true,
            },
            ChainError::EmptyDescription => Self::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
            ChainError::ChainFull(_) => Self::new(StatusCode::CONFLICT, e.to_string()),
            e => Self::internal(e),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({"error": self.message, "retryable": self.retryable});
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.len() <= 64 && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn session_path(store: &RunStore, id: &str) -> PathBuf {
    store.sessions_dir().join(format!("{id}.json"))
}

impl AppState {
    fn session_runner(&self, config: RunConfig, annotator: &str) -> Runner {
        let backends = Backends {
            describer: Arc::new(HumanDescriber::new(annotator)),
            ..self.0.backends.clone()
        };
        Runner::new(config, backends, self.0.store.clone())
    }

    fn open(&self, record: SessionRecord) -> ApiResult<Session> {
        let handle = self.0.store.open_run(&record.run_id)?;
        let manifest = handle.manifest();
        let runner = self.session_runner(manifest.config.clone(), &record.annotator_id);
        let expected: BTreeMap<String, String> = runner.backends().identities().into_iter().collect();
        if manifest.backends != expected {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                format!("session {} was created with different backends", record.session_id),
            ));
        }
        Ok(Session {
            record,
            runner,
            handle: Arc::new(Mutex::new(handle)),
        })
    }

    fn session(&self, id: &str) -> ApiResult<Arc<tokio::sync::Mutex<Session>>> {
        let not_found = || ApiError::new(StatusCode::NOT_FOUND, format!("unknown session `{id}`"));
        if !valid_name(id) {
            return Err(not_found());
        }
        if let Some(s) = self.0.sessions.lock().unwrap().get(id) {
            return Ok(s.clone());
        }
        let path = session_path(&self.0.store, id);
        if !path.exists() {
            return Err(not_found());
        }
        let record: SessionRecord = self.0.store.read_json(&path)?;
        let session = Arc::new(tokio::sync::Mutex::new(self.open(record)?));
        Ok(self
            .0
            .sessions
            .lock()
            .unwrap()
            .entry(id.to_string())
            .or_insert(session)
            .clone())
    }

    fn existing_sessions(&self) -> std::io::Result<usize> {
        match std::fs::read_dir(self.0.store.sessions_dir()) {
            Ok(dir) => Ok(dir
                .filter_map(Result::ok)
                .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                .count()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(0),
            Err(e) => Err(e),
        }
    }

    /// Registers a session for `annotator` and creates its run.
    pub async fn create_session(&self, annotator: &str) -> ApiResult<SessionRecord> {
        if !valid_name(annotator) {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "annotator_id must be 1-64 characters of [A-Za-z0-9_-]",
            ));
        }
        let _guard = self.0.create.lock().await;
        let index = self.existing_sessions().map_err(ApiError::internal)?;
        let seeds = assign(&self.0.pool, &self.0.config, self.0.per_category, self.0.assignment_seed, index);
        if seeds.is_empty() {
            return Err(ApiError::internal("no samples to assign"));
        }
        let runner = self.session_runner(self.0.config.clone(), annotator);
        let run_id = runner.create_run(&seeds).map_err(ApiError::internal)?;
        let record = SessionRecord {
            session_id: format!("{annotator}-{index:04}"),
            annotator_id: annotator.to_string(),
            run_id,
            samples: seeds.iter().map(|s| s.id.clone()).collect(),
            word_limit: self.0.config.word_limit,
            iterations: self.0.config.iterations,
        };
        self.0
            .store
            .write_json(&session_path(&self.0.store, &record.session_id), &record)?;
        tracing::info!(session = %record.session_id, run_id = %record.run_id, samples = seeds.len(), "session created");
        Ok(record)
    }
}

impl Session {
    fn chain(&self, sample: &SampleId) -> ApiResult<ChainRecord> {
        Ok(self.handle.lock().unwrap().chain_record(sample)?)
    }

    /// First assigned sample whose chain is not complete.
    fn current(&self) -> ApiResult<Option<ChainRecord>> {
        for id in &self.record.samples {
            let chain = self.chain(id)?;
            if !chain.status.is_complete() {
                return Ok(Some(chain));
            }
        }
        Ok(None)
    }

    fn progress(&self) -> ApiResult<Vec<SampleProgress>> {
        self.record
            .samples
            .iter()
            .map(|id| {
                let c = self.chain(id)?;
                Ok(SampleProgress {
                    sample_id: id.clone(),
                    category: c.seed.category.to_string(),
                    completed_iterations: c.iterations.len() as u32,
                    complete: c.status.is_complete(),
                    gc_at_t: c.gc_at_t,
                })
            })
            .collect()
    }
}

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    pub annotator_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleProgress {
    pub sample_id: SampleId,
    pub category: String,
    pub completed_iterations: u32,
    pub complete: bool,
    pub gc_at_t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub annotator_id: String,
    pub run_id: String,
    pub word_limit: usize,
    pub iterations: u32,
    pub prompt_text: String,
    pub samples: Vec<SampleProgress>,
    pub completed: usize,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextItem {
    pub sample_id: SampleId,
    pub t: u32,
    pub image_url: String,
    /// The describer prompt, shown verbatim.
    pub prompt_text: String,
    /// Most words a description may have.
    pub words_remaining: usize,
    pub completed: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct Describe {
    pub sample_id: SampleId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescribeResult {
    pub accepted: bool,
    pub sample_id: SampleId,
    /// Iteration this description produced.
    pub t: u32,
    pub similarity: f64,
    /// GC over the iterations so far; the chain's GC@T once `done`.
    pub gc_so_far: f64,
    pub next_t: Option<u32>,
    /// The chain of this sample is complete.
    pub done: bool,
    /// Every assigned sample is complete.
    pub session_done: bool,
}

#[derive(Debug, Deserialize)]
pub struct ImageQuery {
    pub sample: SampleId,
    pub t: u32,
}

#[derive(Debug, Deserialize)]
pub struct StripQuery {
    pub sample: SampleId,
}

fn image_url(session: &str, sample: &SampleId, t: u32) -> String {
    let sample: String = url::form_urlencoded::byte_serialize(sample.as_str().as_bytes()).collect();
    format!("/api/session/{session}/image?sample={sample}&t={t}")
}

fn view(session: &Session, prompt: &str) -> ApiResult<SessionView> {
    let samples = session.progress()?;
    let completed = samples.iter().filter(|s| s.complete).count();
    Ok(SessionView {
        session_id: session.record.session_id.clone(),
        annotator_id: session.record.annotator_id.clone(),
        run_id: session.record.run_id.clone(),
        word_limit: session.record.word_limit,
        iterations: session.record.iterations,
        prompt_text: prompt.to_string(),
        done: completed == samples.len(),
        completed,
        samples,
    })
}

async fn create_session(State(app): State<AppState>, Json(req): Json<CreateSession>) -> ApiResult<Response> {
    let record = app.create_session(&req.annotator_id).await?;
    let session = app.session(&record.session_id)?;
    let session = session.lock().await;
    let body = view(&session, &session.runner.config().desc_prompt)?;
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn get_session(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<SessionView>> {
    let session = app.session(&id)?;
    let session = session.lock().await;
    Ok(Json(view(&session, &session.runner.config().desc_prompt)?))
}

async fn next(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<NextItem>> {
    let session = app.session(&id)?;
    let session = session.lock().await;
    let Some(mut chain) = session.current()? else {
        return Err(ApiError::new(StatusCode::CONFLICT, "all samples are complete"));
    };
    session.runner.start_chain(&session.handle, &mut chain).await?;
    let t = chain.next_t();
    let total = session.record.samples.len();
    let completed = session.progress()?.iter().filter(|s| s.complete).count();
    Ok(Json(NextItem {
        image_url: image_url(&id, &chain.seed.id, t - 1),
        sample_id: chain.seed.id,
        t,
        prompt_text: session.runner.config().desc_prompt.clone(),
        words_remaining: session.record.word_limit - 1,
        completed,
        total,
    }))
}

async fn describe(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<Describe>,
) -> ApiResult<Json<DescribeResult>> {
    let session = app.session(&id)?;
    let session = session.lock().await;
    let Some(mut chain) = session.current()? else {
        return Err(ApiError::new(StatusCode::CONFLICT, "all samples are complete"));
    };
    if chain.seed.id != req.sample_id {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("sample `{}` is not the current one (`{}`)", req.sample_id, chain.seed.id),
        ));
    }
    if req.text.trim().is_empty() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "description is empty"));
    }
    let words = word_count(&req.text);
    let limit = session.record.word_limit;
    if words >= limit {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("description has {words} words; it must have fewer than {limit}"),
        ));
    }
    let runner = &session.runner;
    runner.start_chain(&session.handle, &mut chain).await?;
    runner.step(&session.handle, &mut chain, req.text, false).await?;
    let done = runner.finish_chain(&session.handle, &mut chain)?;
    let sims = chain.similarities().unwrap_or_default();
    let gc_so_far = gc_at_t(&sims).map_err(ApiError::internal)?;
    let t = chain.iterations.len() as u32;
    let session_done = session.current()?.is_none();
    tracing::info!(session = %id, sample = %chain.seed.id, t, done, "description accepted");
    Ok(Json(DescribeResult {
        accepted: true,
        sample_id: chain.seed.id.clone(),
        t,
        similarity: *sims.last().expect("step recorded a similarity"),
        gc_so_far,
        next_t: (!done).then_some(t + 1),
        done,
        session_done,
    }))
}

async fn image(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<ImageQuery>,
) -> ApiResult<Response> {
    let session = app.session(&id)?;
    let session = session.lock().await;
    if !session.record.samples.contains(&q.sample) {
        return Err(ApiError::new(StatusCode::NOT_FOUND, format!("sample `{}` is not in this session", q.sample)));
    }
    let bytes = if q.t == 0 {
        let stored = session.handle.lock().unwrap().seed_image(&q.sample)?;
        match stored {
            Some(b) => b,
            None => {
                let seed = session.chain(&q.sample)?.seed;
                dataset::read_image(&seed).map_err(ApiError::internal)?
            }
        }
    } else {
        let chain = session.chain(&q.sample)?;
        let it = chain
            .iterations
            .iter()
            .find(|i| i.t == q.t)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no image for t={}", q.t)))?;
        session.handle.lock().unwrap().read_artifact(&it.image_ref)?
    };
    Ok(([(header::CONTENT_TYPE, imaging::mime_type(&bytes))], bytes).into_response())
}

async fn strip(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<StripQuery>,
) -> ApiResult<Html<String>> {
    let session = app.session(&id)?;
    let session = session.lock().await;
    if !session.record.samples.contains(&q.sample) {
        return Err(ApiError::new(StatusCode::NOT_FOUND, format!("sample `{}` is not in this session", q.sample)));
    }
    let bundle = app.store().export_chain(&session.record.run_id, &q.sample)?;
    Ok(Html(render_chain_strip(&bundle, StripFormat::Html)))
}

/// The JSON API, plus static assets from `static_dir` at `/`.
pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/session", post(create_session))
        .route("/api/session/{id}", get(get_session))
        .route("/api/session/{id}/next", get(next))
        .route("/api/session/{id}/describe", post(describe))
        .route("/api/session/{id}/image", get(image))
        .route("/api/session/{id}/strip", get(strip))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(state: AppState, host: &str, port: u16, static_dir: Option<PathBuf>) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind((host, port))
        .await
        .with_context(|| format!("binding {host}:{port}"))?;
    tracing::info!(
        addr = %listener.local_addr()?,
        iterations = state.config().iterations,
        "annotator server listening"
    );
    axum::serve(listener, router(state, static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
