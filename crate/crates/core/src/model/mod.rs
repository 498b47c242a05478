//! Domain types shared by the metrics engine, orchestrator, storage and reports.
//!
//! Nothing in here performs I/O. Images are referenced by locator strings and
//! only ever handled as opaque bytes by the layers above.

mod category;
mod chain;
mod config;
mod score;
mod validate;

pub use category::{CategoryEntry, CategoryId, CategorySet, GroupId};
pub use chain::{ChainRecord, ChainStatus, EmbeddingVector, IterationRecord, SampleId, SeedSample};
pub use config::{
    CorrelationKind, RetryPolicy, RunConfig, DEFAULT_DESC_PROMPT, DEFAULT_GEN_PROMPT_TEMPLATE,
    DESCRIPTION_SLOT,
};
pub use score::{Direction, FeatureStats, RankRow, ScoreTable, OVERALL_SCOPE};
pub use validate::{validate_dataset, ValidationReport, Violation};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("category set is empty")]
    EmptyCategorySet,
    #[error("invalid category: {0}")]
    InvalidCategory(String),
    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),
    #[error("invalid feature statistics: {0}")]
    InvalidFeatureStats(String),
    #[error("invalid chain record: {0}")]
    InvalidChain(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid score table: {0}")]
    InvalidScoreTable(String),
}

/// Number of whitespace-delimited tokens in `text`.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}
