//! End-to-end helpers shared by the command line and the test suites.

use std::path::PathBuf;

use thiserror::Error;

use crate::backends::Backends;
use crate::fixtures;
use crate::metrics::{score_table, MetricsError, ScoreRow};
use crate::model::{Direction, RunConfig, ScoreTable};
use crate::orchestrator::{gc_score_row, FidReport, OrchestratorError, Runner};
use crate::storage::{RunState, RunStore};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Orchestrator(#[from] OrchestratorError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("fixture dataset: {0}")]
    Fixture(#[from] std::io::Error),
}

/// Display name of a run in multi-run tables: its describer id, suffixed with
/// the run id when two runs share a describer.
pub fn model_names(states: &[&RunState]) -> Vec<String> {
    let describer = |s: &RunState| s.backends.get("describer").cloned().unwrap_or_else(|| s.run_id.clone());
    states
        .iter()
        .map(|s| {
            let name = describer(s);
            if states.iter().filter(|o| describer(o) == name).count() > 1 {
                format!("{name} ({})", s.run_id)
            } else {
                name
            }
        })
        .collect()
}

/// GC@T table with one column per run.
pub fn gc_table(states: &[&RunState]) -> Result<ScoreTable, MetricsError> {
    let first = states.first().ok_or(MetricsError::NoScores)?;
    let rows = model_names(states)
        .into_iter()
        .zip(states)
        .map(|(name, s)| Ok((name, gc_score_row(s)?)))
        .collect::<Result<Vec<(String, ScoreRow)>, MetricsError>>()?;
    score_table(
        format!("GC@{} cosine", first.config.iterations),
        Direction::HigherBetter,
        3,
        &first.config.categories,
        rows,
    )
}

/// Per-category GC_FID@T table with one column per run.
pub fn fid_table(runs: &[(&RunState, &FidReport)]) -> Result<ScoreTable, MetricsError> {
    let (first, _) = runs.first().ok_or(MetricsError::NoScores)?;
    let states: Vec<&RunState> = runs.iter().map(|(s, _)| *s).collect();
    let rows = model_names(&states)
        .into_iter()
        .zip(runs)
        .map(|(name, (s, r))| Ok((name, r.score_row(s)?)))
        .collect::<Result<Vec<(String, ScoreRow)>, MetricsError>>()?;
    score_table(
        format!("GC_FID@{}", first.config.iterations),
        Direction::LowerBetter,
        1,
        &first.config.categories,
        rows,
    )
}

#[derive(Debug, Clone)]
pub struct MockRunOptions {
    /// Store root; the fixture dataset is written to `<root>/fixtures/dataset`.
    pub root: PathBuf,
    pub iterations: u32,
    pub parallelism: usize,
    pub seed: u64,
    pub fid: bool,
}

impl MockRunOptions {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            iterations: 3,
            parallelism: 4,
            seed: 0,
            fid: true,
        }
    }

    pub fn config(&self) -> RunConfig {
        RunConfig {
            iterations: self.iterations,
            parallelism: self.parallelism,
            mock_seed: self.seed,
            dataset: self.root.join("fixtures").join("dataset"),
            ..RunConfig::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct MockRunOutput {
    pub state: RunState,
    pub gc_table: ScoreTable,
    pub fid: Option<FidReport>,
    pub fid_table: Option<ScoreTable>,
}

/// Runs the whole offline pipeline on the bundled fixture dataset.
/// `backends` defaults to the mocks; tests pass wrapped mocks to count calls.
pub async fn mock_run(opts: &MockRunOptions, backends: Option<Backends>) -> Result<MockRunOutput, PipelineError> {
    let config = opts.config();
    let seeds = fixtures::write_fixture_dataset(&config.dataset)?;
    let backends = backends.unwrap_or_else(|| Backends::mock(opts.seed));
    let runner = Runner::new(config, backends, RunStore::new(&opts.root));
    let state = runner.run_dataset(&seeds).await?;
    finish_mock_run(&runner, state, opts.fid).await
}

/// Scores an executed run the way `mock_run` does.
pub async fn finish_mock_run(runner: &Runner, state: RunState, with_fid: bool) -> Result<MockRunOutput, PipelineError> {
    let gc_table = gc_table(&[&state])?;
    let (fid, fid_table) = if with_fid {
        let report = runner.run_fid_scoring(&state).await?;
        runner
            .store()
            .write_run_json(&state.run_id, "fid.json", &report)
            .map_err(OrchestratorError::from)?;
        let table = fid_table(&[(&state, &report)])?;
        (Some(report), Some(table))
    } else {
        (None, None)
    };
    Ok(MockRunOutput {
        state,
        gc_table,
        fid,
        fid_table,
    })
}
