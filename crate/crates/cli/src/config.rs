//! Run configuration for the command line.
//!
//! Precedence, highest first: command-line flags, the TOML config file,
//! built-in defaults. A relative `dataset` path in a config file resolves
//! against the file's directory; on the command line it resolves against the
//! working directory.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use genception::model::{CorrelationKind, RunConfig};

use crate::InvalidInput;

/// Flags that override individual `RunConfig` fields.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigFlags {
    /// Iterations per chain (T).
    #[arg(long)]
    pub iterations: Option<u32>,
    /// Describer backend id, e.g. `mock`, `openai:gpt-4o`.
    #[arg(long)]
    pub describer: Option<String>,
    /// Generator backend id, e.g. `mock`, `openai-images:dall-e-3`.
    #[arg(long)]
    pub generator: Option<String>,
    /// Embedding backend id, e.g. `mock`, `sidecar`.
    #[arg(long)]
    pub encoder: Option<String>,
    #[arg(long)]
    pub fid_features: Option<String>,
    /// Dataset directory (`<root>/<category>/<image>`).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub word_limit: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Maximum chains in flight.
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub requests_per_minute: Option<u32>,
    #[arg(long)]
    pub sidecar_url: Option<String>,
    #[arg(long)]
    pub provider_base_url: Option<String>,
    #[arg(long, value_parser = parse_correlation)]
    pub correlation: Option<CorrelationKind>,
    #[arg(long)]
    pub mock_seed: Option<u64>,
    /// Always call the backends instead of reusing cached responses.
    #[arg(long)]
    pub no_cache: bool,
}

pub fn parse_correlation(s: &str) -> Result<CorrelationKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "pearson" => Ok(CorrelationKind::Pearson),
        "spearman" => Ok(CorrelationKind::Spearman),
        other => Err(format!("unknown correlation `{other}` (expected pearson or spearman)")),
    }
}

impl ConfigFlags {
    pub fn sets_iterations(&self) -> bool {
        self.iterations.is_some()
    }

    pub fn apply(&self, config: &mut RunConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field {
                    config.$field = v.clone().into();
                })*
            };
        }
        set!(
            iterations,
            describer,
            generator,
            encoder,
            fid_features,
            dataset,
            word_limit,
            temperature,
            parallelism,
            sidecar_url,
            mock_seed
        );
        if let Some(v) = self.correlation {
            config.correlation = v;
        }
        if let Some(v) = self.requests_per_minute {
            config.requests_per_minute = Some(v);
        }
        if let Some(v) = &self.provider_base_url {
            config.provider_base_url = Some(v.clone());
        }
        if self.no_cache {
            config.cache = false;
        }
    }
}

/// A resolved configuration and whether anything set `iterations` explicitly.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub explicit_iterations: bool,
}

/// Parses a config file, leaving unset fields at their defaults.
pub fn read_file(path: &Path) -> anyhow::Result<(RunConfig, toml::Table)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| InvalidInput(format!("{}: {e}", path.display())))?;
    let mut config =
        RunConfig::from_toml(&text).map_err(|e| InvalidInput(format!("{}: {e}", path.display())))?;
    if config.dataset.is_relative() && table.contains_key("dataset") {
        if let Some(dir) = path.parent() {
            config.dataset = dir.join(&config.dataset);
        }
    }
    Ok((config, table))
}

/// Defaults, then `file`, then `flags`.
pub fn resolve(file: Option<&Path>, flags: &ConfigFlags) -> anyhow::Result<Resolved> {
    let (mut config, file_sets_iterations) = match file {
        Some(path) => {
            let (config, table) = read_file(path)?;
            (config, table.contains_key("iterations"))
        }
        None => (RunConfig::default(), false),
    };
    flags.apply(&mut config);
    config
        .validate()
        .map_err(|e| InvalidInput(e.to_string()))?;
    Ok(Resolved {
        config,
        explicit_iterations: file_sets_iterations || flags.sets_iterations(),
    })
}
