use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{OrchestratorError, Runner};
use crate::backends::{BackendError, FeatureRequest, FeatureResponse};
use crate::metrics::{self, gaussian_stats, MetricsError, ScoreRow};
use crate::model::{CategoryId, ChainRecord};
use crate::storage::{CacheKey, RunState};

/// FID series of one image set: D^(0) against each D^(t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidScope {
    /// `run` for the pooled set, otherwise a category id.
    pub scope: String,
    /// Number of chains contributing to every D^(t).
    pub images: usize,
    /// fid^(t) for t = 1..T; `None` where the set was too small.
    pub series: Vec<Option<f64>>,
    /// GC_FID@T, present when every fid^(t) is.
    pub gc_fid: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidReport {
    pub run_id: String,
    pub feature_id: String,
    pub iterations: u32,
    pub run: FidScope,
    /// Empty unless every category in the run has at least two complete chains.
    pub categories: Vec<FidScope>,
    pub warnings: Vec<String>,
}

impl FidReport {
    /// Per-category GC_FID@T as a score row over `state`'s category set.
    pub fn score_row(&self, state: &RunState) -> Result<ScoreRow, MetricsError> {
        let set = &state.config.categories;
        let mut cells = vec![None; set.len()];
        for scope in &self.categories {
            if let Some(i) = set.index_of(&CategoryId::new(scope.scope.as_str())) {
                cells[i] = scope.gc_fid;
            }
        }
        metrics::aggregate_cells(&cells, set)
    }
}

impl Runner {
    async fn features(&self, image: &[u8]) -> Result<Vec<f64>, BackendError> {
        let fx = &self.backends.features;
        let req = FeatureRequest {
            image: image.to_vec(),
        };
        let key = CacheKey::new(&fx.id(), "", image, 0.0);
        let bytes = self
            .cached(key, || async {
                let resp = self.features_policy.run(|| fx.extract_features(&req)).await?;
                Ok(serde_json::to_vec(&resp).expect("feature response serializes"))
            })
            .await?;
        let resp: FeatureResponse = serde_json::from_slice(&bytes)
            .map_err(|e| BackendError::malformed(format!("cached features: {e}")))?;
        Ok(resp.vector)
    }

    /// Feature vectors of X^(0..T) for each chain, index 0 being the seed.
    async fn chain_features(&self, state: &RunState, chain: &ChainRecord) -> Result<Vec<Vec<f64>>, OrchestratorError> {
        let handle = self.store.open_run(&state.run_id)?;
        let seed = handle
            .seed_image(&chain.seed.id)?
            .ok_or_else(|| OrchestratorError::Invalid(format!("seed image of `{}` not stored", chain.seed.id)))?;
        let mut out = vec![self.features(&seed).await.map_err(OrchestratorError::Features)?];
        for it in &chain.iterations {
            let img = handle.read_artifact(&it.image_ref)?;
            out.push(self.features(&img).await.map_err(OrchestratorError::Features)?);
        }
        Ok(out)
    }

    /// FID between the seed set D^(0) and each generated set D^(t), pooled
    /// over the run and, where every category has at least two complete
    /// chains, per category. Only complete chains contribute.
    pub async fn run_fid_scoring(&self, state: &RunState) -> Result<FidReport, OrchestratorError> {
        let t_max = state.config.iterations;
        let feature_id = self.backends.features.id();
        let mut per_chain = Vec::new();
        for chain in state.complete_chains() {
            per_chain.push((chain.seed.category.clone(), self.chain_features(state, chain).await?));
        }
        let mut warnings = Vec::new();
        let run = fid_scope("run", &per_chain.iter().map(|(_, f)| f).collect::<Vec<_>>(), t_max, &feature_id, &mut warnings)?;

        let mut by_cat: BTreeMap<&CategoryId, Vec<&Vec<Vec<f64>>>> = BTreeMap::new();
        for (cat, f) in &per_chain {
            by_cat.entry(cat).or_default().push(f);
        }
        let mut categories = Vec::new();
        let small: Vec<String> = by_cat
            .iter()
            .filter(|(_, v)| v.len() < 2)
            .map(|(c, _)| c.to_string())
            .collect();
        if small.is_empty() {
            for cat in state.config.categories.categories() {
                if let Some(chains) = by_cat.get(cat) {
                    categories.push(fid_scope(cat.as_str(), chains, t_max, &feature_id, &mut warnings)?);
                }
            }
        } else {
            let w = format!(
                "per-category FID skipped: fewer than 2 complete chains in {}",
                small.join(", ")
            );
            tracing::warn!("{w}");
            warnings.push(w);
        }
        Ok(FidReport {
            run_id: state.run_id.clone(),
            feature_id,
            iterations: t_max,
            run,
            categories,
            warnings,
        })
    }
}

fn fid_scope(
    scope: &str,
    chains: &[&Vec<Vec<f64>>],
    t_max: u32,
    feature_id: &str,
    warnings: &mut Vec<String>,
) -> Result<FidScope, OrchestratorError> {
    let n = chains.len();
    let set = |t: usize| -> Vec<Vec<f64>> { chains.iter().map(|c| c[t].clone()).collect() };
    let mut series = Vec::with_capacity(t_max as usize);
    if n < 2 {
        let w = format!("{scope}: FID skipped for every t, |D^(t)| = {n} < 2");
        tracing::warn!("{w}");
        warnings.push(w);
        series.resize(t_max as usize, None);
    } else {
        let seed_stats = gaussian_stats(&set(0), feature_id)?;
        for t in 1..=t_max as usize {
            let stats = gaussian_stats(&set(t), feature_id)?;
            series.push(Some(metrics::fid(&seed_stats, &stats)?));
        }
    }
    let gc_fid = series
        .iter()
        .copied()
        .collect::<Option<Vec<f64>>>()
        .map(|s| metrics::gc_fid_at_t(&s))
        .transpose()?;
    Ok(FidScope {
        scope: scope.into(),
        images: n,
        series,
        gc_fid,
    })
}
