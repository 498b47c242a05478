use std::sync::Arc;

use super::mock::{HumanDescriber, MockDescriber, MockEmbedder, MockFeatureExtractor, MockGenerator, MOCK_FEATURE_DIM};
use super::{
    BackendError, ChatDescriber, Describer, Embedder, FeatureExtractor, Generator, ImageGenerator,
    Provider, SidecarClient,
};
use crate::model::RunConfig;

/// The four backend roles resolved for a run.
#[derive(Clone)]
pub struct Backends {
    pub describer: Arc<dyn Describer>,
    pub generator: Arc<dyn Generator>,
    pub embedder: Arc<dyn Embedder>,
    pub features: Arc<dyn FeatureExtractor>,
    /// Set when the generator is the echo mock; seeds must be registered
    /// with it before a chain starts.
    pub echo: Option<MockGenerator>,
}

impl Backends {
    /// Offline backends: mock describer, renderer, embedder and features.
    pub fn mock(seed: u64) -> Self {
        Self {
            describer: Arc::new(MockDescriber),
            generator: Arc::new(MockGenerator::new(seed)),
            embedder: Arc::new(MockEmbedder::new(seed)),
            features: Arc::new(MockFeatureExtractor::new(seed, MOCK_FEATURE_DIM)),
            echo: None,
        }
    }

    /// Offline backends whose generator returns the input image unchanged.
    pub fn mock_echo(seed: u64) -> Self {
        let echo = MockGenerator::echo();
        Self {
            generator: Arc::new(echo.clone()),
            echo: Some(echo),
            ..Self::mock(seed)
        }
    }

    pub fn register_seed(&self, image: &[u8]) {
        if let Some(echo) = &self.echo {
            echo.register(image);
        }
    }

    /// `(role, backend id)` pairs recorded in run manifests.
    pub fn identities(&self) -> Vec<(String, String)> {
        vec![
            ("describer".into(), self.describer.id()),
            ("generator".into(), self.generator.id()),
            ("encoder".into(), self.embedder.id()),
            ("fid_features".into(), self.features.id()),
        ]
    }
}

fn unknown(role: &str, id: &str) -> BackendError {
    BackendError::malformed(format!("unknown {role} backend `{id}`"))
}

/// Resolves the backend identifiers in `config`.
///
/// | Role        | Identifiers                                                      |
/// | ----------- | ---------------------------------------------------------------- |
/// | describer   | `mock`, `human`, `openai:<model>`, `anthropic:<model>`, `gemini:<model>` |
/// | generator   | `mock`, `mock-echo`, `openai-images:<model>`                     |
/// | encoder     | `mock`, `sidecar`, `sidecar:<model>`                             |
/// | fid features| `mock`, `sidecar`                                                |
pub fn build_backends(config: &RunConfig) -> Result<Backends, BackendError> {
    let seed = config.mock_seed;
    let base = config.provider_base_url.clone();

    let describer: Arc<dyn Describer> = match config.describer.as_str() {
        "mock" => Arc::new(MockDescriber),
        "human" => Arc::new(HumanDescriber::new("unassigned")),
        id => {
            let (prefix, model) = id.split_once(':').ok_or_else(|| unknown("describer", id))?;
            let provider = Provider::from_prefix(prefix).ok_or_else(|| unknown("describer", id))?;
            Arc::new(ChatDescriber::from_env(provider, model, base.clone())?)
        }
    };

    let mut echo = None;
    let generator: Arc<dyn Generator> = match config.generator.as_str() {
        "mock" => Arc::new(MockGenerator::new(seed)),
        "mock-echo" => {
            let g = MockGenerator::echo();
            echo = Some(g.clone());
            Arc::new(g)
        }
        id => match id.split_once(':') {
            Some(("openai-images", model)) => Arc::new(ImageGenerator::from_env(model, base)?),
            _ => return Err(unknown("generator", id)),
        },
    };

    let embedder: Arc<dyn Embedder> = match config.encoder.as_str() {
        "mock" => Arc::new(MockEmbedder::new(seed)),
        "sidecar" => Arc::new(SidecarClient::new(&config.sidecar_url)),
        id => match id.split_once(':') {
            Some(("sidecar", model)) => Arc::new(SidecarClient::new(&config.sidecar_url).with_model(model)),
            _ => return Err(unknown("encoder", id)),
        },
    };

    let features: Arc<dyn FeatureExtractor> = match config.fid_features.as_str() {
        "mock" => Arc::new(MockFeatureExtractor::new(seed, MOCK_FEATURE_DIM)),
        "sidecar" => Arc::new(SidecarClient::new(&config.sidecar_url)),
        id => return Err(unknown("fid_features", id)),
    };

    Ok(Backends {
        describer,
        generator,
        embedder,
        features,
        echo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolves_mock_and_sidecar_ids() {
        let mut config = RunConfig::default();
        let b = build_backends(&config).unwrap();
        assert_eq!(b.describer.id(), "mock-describer");
        assert!(b.echo.is_none());

        config.generator = "mock-echo".into();
        config.encoder = "sidecar:vit-b16".into();
        let b = build_backends(&config).unwrap();
        assert!(b.echo.is_some());
        assert_eq!(b.embedder.id(), "sidecar:vit-b16");
    }

    #[test]
    fn rejects_unknown_ids() {
        let config = RunConfig {
            describer: "llava".into(),
            ..RunConfig::default()
        };
        assert!(build_backends(&config).is_err());
        let config = RunConfig {
            generator: "dalle".into(),
            ..RunConfig::default()
        };
        assert!(build_backends(&config).is_err());
    }
}
