use std::sync::{Arc, Mutex};

use tokio::sync::Notify;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{
    BackendError, DescriberRequest, DescriberResponse, Describer, EmbedRequest, EmbedResponse,
    Embedder, FeatureExtractor, FeatureRequest, FeatureResponse, Generator, GeneratorRequest,
    GeneratorResponse,
};
use crate::digest::short_hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Describe,
    Generate,
    Embed,
    Features,
}

/// One issued backend call, identified by what was sent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CallRecord {
    pub role: Role,
    pub backend: String,
    /// Short hash of the request payload (image bytes or prompt).
    pub input: String,
}

/// Append-only log of backend calls, shared between wrappers.
#[derive(Debug, Default)]
pub struct CallLog {
    records: Mutex<Vec<CallRecord>>,
}

impl CallLog {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    fn push(&self, role: Role, backend: String, input: &[u8]) {
        self.records.lock().unwrap().push(CallRecord {
            role,
            backend,
            input: short_hash(input),
        });
    }

    pub fn records(&self) -> Vec<CallRecord> {
        self.records.lock().unwrap().clone()
    }

    pub fn count(&self, role: Role) -> usize {
        self.records.lock().unwrap().iter().filter(|r| r.role == role).count()
    }

    pub fn total(&self) -> usize {
        self.records.lock().unwrap().len()
    }
}

/// Wraps a backend and records every call it forwards.
pub struct Recorded<B> {
    inner: B,
    log: Arc<CallLog>,
}

impl<B> Recorded<B> {
    pub fn new(inner: B, log: Arc<CallLog>) -> Self {
        Self { inner, log }
    }
}

#[async_trait]
impl<B: Describer> Describer for Recorded<B> {
    fn id(&self) -> String {
        self.inner.id()
    }

    async fn describe(&self, req: &DescriberRequest) -> Result<DescriberResponse, BackendError> {
        self.log.push(Role::Describe, self.id(), &req.image);
        self.inner.describe(req).await
    }
}

#[async_trait]
impl<B: Generator> Generator for Recorded<B> {
    fn id(&self) -> String {
        self.inner.id()
    }

    async fn generate(&self, req: &GeneratorRequest) -> Result<GeneratorResponse, BackendError> {
        self.log.push(Role::Generate, self.id(), req.prompt.as_bytes());
        self.inner.generate(req).await
    }
}

#[async_trait]
impl<B: Embedder> Embedder for Recorded<B> {
    fn id(&self) -> String {
        self.inner.id()
    }

    async fn embed(&self, req: &EmbedRequest) -> Result<EmbedResponse, BackendError> {
        self.log.push(Role::Embed, self.id(), &req.image);
        self.inner.embed(req).await
    }
}

#[async_trait]
impl<B: FeatureExtractor> FeatureExtractor for Recorded<B> {
    fn id(&self) -> String {
        self.inner.id()
    }

    async fn extract_features(&self, req: &FeatureRequest) -> Result<FeatureResponse, BackendError> {
        self.log.push(Role::Features, self.id(), &req.image);
        self.inner.extract_features(req).await
    }
}

/// Fault injection: lets a fixed number of calls through, then parks every
/// later call forever, as if the process had stalled mid-request.
#[derive(Debug)]
pub struct Gate {
    remaining: Mutex<usize>,
    notify: Notify,
}

impl Gate {
    pub fn new(budget: usize) -> Arc<Self> {
        Arc::new(Self {
            remaining: Mutex::new(budget),
            notify: Notify::new(),
        })
    }

    /// Resolves once some call has been parked.
    pub async fn tripped(&self) {
        self.notify.notified().await;
    }

    async fn pass(&self) {
        let open = {
            let mut left = self.remaining.lock().unwrap();
            if *left > 0 {
                *left -= 1;
                true
            } else {
                false
            }
        };
        if !open {
            self.notify.notify_one();
            std::future::pending::<()>().await;
        }
    }
}

/// Wraps a backend so its calls draw from a shared [`Gate`] budget.
pub struct Gated<B> {
    inner: B,
    gate: Arc<Gate>,
}

impl<B> Gated<B> {
    pub fn new(inner: B, gate: Arc<Gate>) -> Self {
        Self { inner, gate }
    }
}

#[async_trait]
impl<B: Describer> Describer for Gated<B> {
    fn id(&self) -> String {
        self.inner.id()
    }

    async fn describe(&self, req: &DescriberRequest) -> Result<DescriberResponse, BackendError> {
        self.gate.pass().await;
        self.inner.describe(req).await
    }
}

#[async_trait]
impl<B: Generator> Generator for Gated<B> {
    fn id(&self) -> String {
        self.inner.id()
    }

    async fn generate(&self, req: &GeneratorRequest) -> Result<GeneratorResponse, BackendError> {
        self.gate.pass().await;
        self.inner.generate(req).await
    }
}

#[async_trait]
impl<B: Embedder> Embedder for Gated<B> {
    fn id(&self) -> String {
        self.inner.id()
    }

    async fn embed(&self, req: &EmbedRequest) -> Result<EmbedResponse, BackendError> {
        self.gate.pass().await;
        self.inner.embed(req).await
    }
}

#[async_trait]
impl<T: Describer + ?Sized> Describer for Arc<T> {
    fn id(&self) -> String {
        (**self).id()
    }

    async fn describe(&self, req: &DescriberRequest) -> Result<DescriberResponse, BackendError> {
        (**self).describe(req).await
    }
}

#[async_trait]
impl<T: Generator + ?Sized> Generator for Arc<T> {
    fn id(&self) -> String {
        (**self).id()
    }

    async fn generate(&self, req: &GeneratorRequest) -> Result<GeneratorResponse, BackendError> {
        (**self).generate(req).await
    }
}

#[async_trait]
impl<T: Embedder + ?Sized> Embedder for Arc<T> {
    fn id(&self) -> String {
        (**self).id()
    }

    async fn embed(&self, req: &EmbedRequest) -> Result<EmbedResponse, BackendError> {
        (**self).embed(req).await
    }
}

#[async_trait]
impl<T: FeatureExtractor + ?Sized> FeatureExtractor for Arc<T> {
    fn id(&self) -> String {
        (**self).id()
    }

    async fn extract_features(&self, req: &FeatureRequest) -> Result<FeatureResponse, BackendError> {
        (**self).extract_features(req).await
    }
}
