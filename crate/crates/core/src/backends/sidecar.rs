//! Client for the embedding sidecar.
//!
//! Wire protocol (JSON over HTTP, versioned under `/v1`):
//!
//! | Method | Path               | Request                    | Response                                   |
//! | ------ | ------------------ | -------------------------- | ------------------------------------------ |
//! | POST   | `/v1/embed`        | `{image_b64, model?}`      | `{vector: [f64], dim, encoder_id}`         |
//! | POST   | `/v1/fid_features` | `{image_b64}`              | `{vector: [f64], dim: 2048, feature_id}`   |
//! | GET    | `/v1/health`       |                            | `{status, encoder_ids: [string]}`          |
//!
//! 400 means the image did not decode, 422 an unsupported model, 503 that the
//! models failed to load.

use async_trait::async_trait;
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    BackendError, EmbedRequest, EmbedResponse, Embedder, ErrorClass, FeatureExtractor,
    FeatureRequest, FeatureResponse,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthStatus {
    pub status: String,
    #[serde(default)]
    pub encoder_ids: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SidecarClient {
    client: reqwest::Client,
    base_url: String,
    model: Option<String>,
}

fn sidecar_error(status: u16, body: &str) -> BackendError {
    let class = match status {
        400 | 422 => ErrorClass::Malformed,
        429 => ErrorClass::RateLimited,
        _ => ErrorClass::Transport,
    };
    BackendError::new(class, format!("sidecar HTTP {status}: {body}"))
}

impl SidecarClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            client: reqwest::Client::new(),
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: None,
        }
    }

    /// Requests a specific embedding model instead of the sidecar default.
    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = Some(model.into());
        self
    }

    async fn post<T: serde::de::DeserializeOwned>(
        &self,
        path: &str,
        body: serde_json::Value,
    ) -> Result<T, BackendError> {
        let resp = self
            .client
            .post(format!("{}{path}", self.base_url))
            .json(&body)
            .send()
            .await
            .map_err(|e| BackendError::transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .text()
            .await
            .map_err(|e| BackendError::transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(sidecar_error(status, &text));
        }
        serde_json::from_str(&text).map_err(|e| BackendError::malformed(format!("invalid sidecar JSON: {e}")))
    }

    pub async fn health(&self) -> Result<HealthStatus, BackendError> {
        let resp = self
            .client
            .get(format!("{}/v1/health", self.base_url))
            .send()
            .await
            .map_err(|e| BackendError::transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .text()
            .await
            .map_err(|e| BackendError::transport(e.to_string()))?;
        if status != 200 {
            return Err(sidecar_error(status, &text));
        }
        serde_json::from_str(&text).map_err(|e| BackendError::malformed(e.to_string()))
    }
}

fn check_vector(vector: &[f64], dim: usize) -> Result<(), BackendError> {
    if vector.len() != dim {
        return Err(BackendError::malformed(format!(
            "sidecar reported dim {dim} for a vector of length {}",
            vector.len()
        )));
    }
    if vector.iter().any(|v| !v.is_finite()) {
        return Err(BackendError::malformed("sidecar returned non-finite values"));
    }
    Ok(())
}

#[async_trait]
impl Embedder for SidecarClient {
    fn id(&self) -> String {
        format!("sidecar:{}", self.model.as_deref().unwrap_or("default"))
    }

    async fn embed(&self, req: &EmbedRequest) -> Result<EmbedResponse, BackendError> {
        let mut body = json!({"image_b64": B64.encode(&req.image)});
        if let Some(m) = &self.model {
            body["model"] = json!(m);
        }
        let resp: EmbedResponse = self.post("/v1/embed", body).await?;
        check_vector(&resp.vector, resp.dim)?;
        Ok(resp)
    }
}

#[async_trait]
impl FeatureExtractor for SidecarClient {
    fn id(&self) -> String {
        "sidecar:fid".into()
    }

    async fn extract_features(&self, req: &FeatureRequest) -> Result<FeatureResponse, BackendError> {
        let body = json!({"image_b64": B64.encode(&req.image)});
        let resp: FeatureResponse = self.post("/v1/fid_features", body).await?;
        check_vector(&resp.vector, resp.dim)?;
        Ok(resp)
    }
}
