//! Pure numeric engine: similarity, GC@T, FID, aggregation, ranking,
//! human-vs-model deltas and correlation. No I/O.

mod aggregate;
mod correlation;
mod fid;
mod gc;
mod rank;
mod similarity;

pub use aggregate::{aggregate, aggregate_cells, delta_percent, score_table, ScoreRow};
pub use correlation::{correlation_matrix, pearson, CorrelationMatrix};
pub use fid::{fid, gaussian_stats};
pub use gc::{gc_at_t, gc_fid_at_t, FidSeries, SimilaritySeries};
pub use rank::rank_models;
pub use similarity::cosine_similarity;

use thiserror::Error;

use crate::model::SampleId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("empty series")]
    EmptySeries,
    #[error("invalid series value {value} at t={t}")]
    InvalidSeriesValue { t: usize, value: f64 },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("encoder mismatch: `{0}` vs `{1}`")]
    EncoderMismatch(String, String),
    #[error("degenerate embedding (zero norm)")]
    DegenerateEmbedding,
    #[error("insufficient samples: need at least 2, got {0}")]
    InsufficientSamples(usize),
    #[error("feature extractor mismatch: `{0}` vs `{1}`")]
    FeatureMismatch(String, String),
    #[error("matrix square root did not converge")]
    SqrtDidNotConverge,
    #[error("numerical instability: FID evaluated to {0}")]
    NumericalInstability(f64),
    #[error("sample `{0}` has no category")]
    MissingCategory(SampleId),
    #[error("score for model {0} is not finite")]
    NonFiniteScore(usize),
    #[error("no scores to rank")]
    NoScores,
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("vector `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("vector `{name}` has length {len}, expected {expected}")]
    LengthMismatch {
        name: String,
        len: usize,
        expected: usize,
    },
    #[error("need at least 3 aligned values, got {0}")]
    TooFewValues(usize),
    #[error("invalid input: {0}")]
    Invalid(String),
}
