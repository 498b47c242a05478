//! Command implementations. Each returns its rendered output so tests can
//! call them without a subprocess.

use std::path::Path;

use anyhow::Context;
use clap::ValueEnum;
use genception::backends::{build_backends, Backends};
use genception::dataset::{self, DatasetError};
use genception::metrics::correlation_matrix;
use genception::model::{CorrelationKind, SampleId};
use genception::orchestrator::{FidReport, OrchestratorError, Runner};
use genception::pipeline::{self, MockRunOptions};
use genception::report::{
    benchmark_vectors, load_benchmarks, render_chain_strip, render_correlations, render_score_table, Format,
    StripFormat,
};
use genception::storage::{RunState, RunStatus, RunStore, StorageError};

use crate::config::{self, ConfigFlags};
use crate::InvalidInput;

/// Scores written next to a run by `score`.
pub const SCORES_FILE: &str = "scores.json";
/// FID report written next to a run by `score --fid`.
pub const FID_FILE: &str = "fid.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StripKind {
    Html,
    Md,
}

impl From<StripKind> for StripFormat {
    fn from(k: StripKind) -> Self {
        match k {
            StripKind::Html => StripFormat::Html,
            StripKind::Md => StripFormat::Md,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    /// GC@T from embedding cosine similarity.
    Gc,
    /// Per-category GC_FID@T.
    Fid,
}

/// Writes `text` to `out`, or to stdout when absent.
pub fn emit(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn storage_error(e: StorageError) -> anyhow::Error {
    match e {
        StorageError::UnknownRun(_) | StorageError::UnknownSample(_) => InvalidInput(e.to_string()).into(),
        e => e.into(),
    }
}

fn dataset_error(e: DatasetError) -> anyhow::Error {
    InvalidInput(e.to_string()).into()
}

pub fn load_run(store: &RunStore, run_id: &str) -> anyhow::Result<RunState> {
    store.load_run(run_id).map_err(storage_error)
}

/// Prints the dataset report; fails on any violation or an empty dataset.
pub fn validate(dataset: &Path, config_file: Option<&Path>) -> anyhow::Result<()> {
    let config = config::resolve(config_file, &ConfigFlags::default())?.config;
    let (_, report) = dataset::validate(dataset, &config.categories).map_err(dataset_error)?;
    println!("{}: {} samples", dataset.display(), report.samples);
    for v in &report.violations {
        println!("  {v}");
    }
    if report.empty {
        return Err(InvalidInput(format!("{} contains no samples", dataset.display())).into());
    }
    if !report.is_valid() {
        return Err(InvalidInput(format!("{} violation(s)", report.violations.len())).into());
    }
    Ok(())
}

/// Executes a new run, or resumes `resume`.
///
/// A resumed run starts from its stored configuration unless a config file
/// is given; flags apply on top either way and must leave the configuration
/// unchanged. `backends` replaces the configured backends (tests).
pub async fn run(
    root: &Path,
    config_file: Option<&Path>,
    flags: &ConfigFlags,
    resume: Option<&str>,
    backends: Option<Backends>,
) -> anyhow::Result<RunState> {
    let store = RunStore::new(root);
    let (config, seeds) = match resume {
        Some(run_id) => {
            let state = load_run(&store, run_id)?;
            let config = match config_file {
                Some(_) => config::resolve(config_file, flags)?.config,
                None => {
                    let mut c = state.config.clone();
                    flags.apply(&mut c);
                    c
                }
            };
            (config, None)
        }
        None => {
            let config = config::resolve(config_file, flags)?.config;
            let (seeds, report) = dataset::validate(&config.dataset, &config.categories).map_err(dataset_error)?;
            if report.empty || !report.is_valid() {
                for v in &report.violations {
                    eprintln!("  {v}");
                }
                return Err(InvalidInput(format!(
                    "dataset {} is not usable ({} samples, {} violations)",
                    config.dataset.display(),
                    report.samples,
                    report.violations.len()
                ))
                .into());
            }
            (config, Some(seeds))
        }
    };
    if config.describer == "human" && backends.is_none() {
        return Err(InvalidInput("the `human` describer is driven through `serve`".into()).into());
    }
    let backends = match backends {
        Some(b) => b,
        None => build_backends(&config).map_err(|e| InvalidInput(e.to_string()))?,
    };
    let runner = Runner::new(config, backends, store);
    let result = match (resume, seeds) {
        (Some(run_id), _) => runner.resume(run_id).await,
        (None, Some(seeds)) => runner.run_dataset(&seeds).await,
        (None, None) => unreachable!("new runs always load seeds"),
    };
    let state = match result {
        Ok(s) => s,
        Err(e @ (OrchestratorError::ConfigMismatch { .. } | OrchestratorError::Config(_))) => {
            return Err(InvalidInput(e.to_string()).into())
        }
        Err(e) => return Err(e.into()),
    };

    let complete = state.complete_chains().count();
    for (sample, reason) in Runner::failures(&state) {
        eprintln!("chain {sample} failed: {reason}");
    }
    println!("run {}: {complete}/{} chains complete", state.run_id, state.chains.len());
    if let RunStatus::Failed(reason) = &state.status {
        anyhow::bail!("run {} failed: {reason}", state.run_id);
    }
    Ok(state)
}

fn fid_summary(report: &FidReport) -> String {
    let value = report
        .run
        .gc_fid
        .map(|v| format!("{v:.3}"))
        .unwrap_or_else(|| "n/a".into());
    format!(
        "GC_FID@{} (run, {} images, {}): {value}; per-category scopes: {}",
        report.iterations,
        report.run.images,
        report.feature_id,
        report.categories.len()
    )
}

/// Renders the GC@T table of `run_id` and stores it as `scores.json`.
/// With `fid`, also computes the FID report and stores it as `fid.json`.
pub async fn score(root: &Path, run_id: &str, fid: bool, format: Format) -> anyhow::Result<String> {
    let store = RunStore::new(root);
    let state = load_run(&store, run_id)?;
    let table = pipeline::gc_table(&[&state]).context("no complete chains to score")?;
    store.write_run_json(run_id, SCORES_FILE, &table)?;
    if fid {
        let backends = build_backends(&state.config).map_err(|e| InvalidInput(e.to_string()))?;
        let runner = Runner::new(state.config.clone(), backends, RunStore::new(root));
        let report = runner.run_fid_scoring(&state).await?;
        for w in &report.warnings {
            tracing::warn!("{w}");
        }
        eprintln!("{}", fid_summary(&report));
        store.write_run_json(run_id, FID_FILE, &report)?;
    }
    Ok(render_score_table(&table, format))
}

/// One table over `run_ids`, one column per run.
pub fn report(root: &Path, run_ids: &[String], metric: Metric, format: Format) -> anyhow::Result<String> {
    let store = RunStore::new(root);
    let states = run_ids
        .iter()
        .map(|id| load_run(&store, id))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let table = match metric {
        Metric::Gc => pipeline::gc_table(&states.iter().collect::<Vec<_>>())?,
        Metric::Fid => {
            let reports = states
                .iter()
                .map(|s| {
                    store.read_run_json::<FidReport>(&s.run_id, FID_FILE)?.ok_or_else(|| {
                        InvalidInput(format!("run {} has no FID report; run `score {} --fid`", s.run_id, s.run_id))
                            .into()
                    })
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            if let Some(r) = reports.iter().find(|r| r.categories.is_empty()) {
                return Err(InvalidInput(format!(
                    "run {} has run-level FID only ({})",
                    r.run_id,
                    fid_summary(r)
                ))
                .into());
            }
            let pairs: Vec<_> = states.iter().zip(&reports).collect();
            pipeline::fid_table(&pairs)?
        }
    };
    Ok(render_score_table(&table, format))
}

/// Correlates each run's overall GC@T (and GC_FID@T when every run has an
/// FID report) with the leaderboards in `benchmarks`.
pub fn correlate(
    root: &Path,
    run_ids: &[String],
    benchmarks: &Path,
    kind: Option<CorrelationKind>,
    format: Format,
) -> anyhow::Result<String> {
    let store = RunStore::new(root);
    let states = run_ids
        .iter()
        .map(|id| load_run(&store, id))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let refs: Vec<&RunState> = states.iter().collect();
    let names = pipeline::model_names(&refs);
    let table = pipeline::gc_table(&refs)?;
    let gc: Vec<f64> = table
        .overall_mean
        .iter()
        .zip(&names)
        .map(|(v, name)| v.ok_or_else(|| anyhow::anyhow!("{name} has no overall GC score")))
        .collect::<anyhow::Result<_>>()?;
    let mut vectors = vec![(table.metric.clone(), gc)];

    let fid: Option<Vec<f64>> = states
        .iter()
        .map(|s| {
            store
                .read_run_json::<FidReport>(&s.run_id, FID_FILE)
                .ok()
                .flatten()
                .and_then(|r| r.run.gc_fid)
        })
        .collect();
    if let Some(fid) = fid {
        vectors.push((format!("GC_FID@{}", states[0].config.iterations), fid));
    }

    let text = std::fs::read_to_string(benchmarks).with_context(|| format!("reading {}", benchmarks.display()))?;
    let scores = load_benchmarks(&text).map_err(|e| InvalidInput(e.to_string()))?;
    vectors.extend(benchmark_vectors(&scores, &names).map_err(|e| InvalidInput(e.to_string()))?);
    let kind = kind.unwrap_or(states[0].config.correlation);
    let m = correlation_matrix(&vectors, kind).map_err(|e| InvalidInput(e.to_string()))?;
    Ok(render_correlations(&m, format)?)
}

/// Renders one chain; `export` also writes its images and bundle.json.
pub fn strip(
    root: &Path,
    run_id: &str,
    sample_id: &str,
    kind: StripKind,
    export: Option<&Path>,
) -> anyhow::Result<String> {
    let store = RunStore::new(root);
    let bundle = store
        .export_chain(run_id, &SampleId::new(sample_id))
        .map_err(storage_error)?;
    if let Some(dir) = export {
        bundle.write_to(dir)?;
    }
    Ok(render_chain_strip(&bundle, kind.into()))
}

/// Offline pipeline over the bundled fixtures; returns the rendered GC table.
pub async fn mock_run(
    root: &Path,
    iterations: u32,
    parallelism: usize,
    seed: u64,
    fid: bool,
    format: Format,
) -> anyhow::Result<String> {
    let opts = MockRunOptions {
        root: root.to_path_buf(),
        iterations,
        parallelism,
        seed,
        fid,
    };
    let out = pipeline::mock_run(&opts, None).await?;
    let store = RunStore::new(root);
    store.write_run_json(&out.state.run_id, SCORES_FILE, &out.gc_table)?;
    eprintln!("run {}", out.state.run_id);
    if let Some(report) = &out.fid {
        eprintln!("{}", fid_summary(report));
    }
    Ok(render_score_table(&out.gc_table, format))
}
