use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{CategorySet, GroupId, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl Direction {
    /// Maps a score onto a scale where larger is always better.
    pub fn oriented(self, score: f64) -> f64 {
        match self {
            Direction::HigherBetter => score,
            Direction::LowerBetter => -score,
        }
    }
}

/// Gaussian summary (mean, sample covariance) of a set of feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub count: usize,
    pub feature_id: String,
}

impl FeatureStats {
    pub fn new(
        mean: DVector<f64>,
        cov: DMatrix<f64>,
        count: usize,
        feature_id: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let bad = |m: String| Err(ModelError::InvalidFeatureStats(m));
        if count < 2 {
            return bad(format!("count {count} < 2"));
        }
        let dim = mean.len();
        if dim == 0 {
            return bad("zero-dimensional features".into());
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return bad(format!(
                "covariance is {}x{}, expected {dim}x{dim}",
                cov.nrows(),
                cov.ncols()
            ));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return bad("non-finite entry".into());
        }
        let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-9 * scale {
                    return bad(format!("covariance not symmetric at ({i}, {j})"));
                }
            }
        }
        Ok(Self {
            mean,
            cov,
            count,
            feature_id: feature_id.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Ranks of every model within one scope (a group or `overall`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankRow {
    pub scope: String,
    /// Absent for models without a score in this scope.
    pub ranks: Vec<Option<u32>>,
}

pub const OVERALL_SCOPE: &str = "overall";

/// Model × category score matrix with group/overall means and ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub metric: String,
    pub direction: Direction,
    /// Decimal places used when rendering.
    pub decimals: usize,
    pub models: Vec<String>,
    pub categories: CategorySet,
    /// `cells[m][c]`; absent when the category had no scored samples.
    pub cells: Vec<Vec<Option<f64>>>,
    /// `group_means[m][g]` in `categories.groups()` order.
    pub group_means: Vec<Vec<Option<f64>>>,
    pub overall_mean: Vec<Option<f64>>,
    /// One row per group followed by `overall`.
    pub ranks: Vec<RankRow>,
}

impl ScoreTable {
    pub fn groups(&self) -> Vec<GroupId> {
        self.categories.groups()
    }

    pub fn rank_row(&self, scope: &str) -> Option<&RankRow> {
        self.ranks.iter().find(|r| r.scope == scope)
    }

    pub fn overall_ranks(&self) -> Option<&RankRow> {
        self.rank_row(OVERALL_SCOPE)
    }

    pub fn model_index(&self, model: &str) -> Option<usize> {
        self.models.iter().position(|m| m == model)
    }

    /// Shape checks; numeric consistency is established by construction.
    pub fn check_shape(&self) -> Result<(), ModelError> {
        let n = self.models.len();
        let bad = |m: String| Err(ModelError::InvalidScoreTable(m));
        if self.cells.len() != n || self.group_means.len() != n || self.overall_mean.len() != n {
            return bad("row count does not match model count".into());
        }
        let groups = self.groups().len();
        for (m, row) in self.cells.iter().enumerate() {
            if row.len() != self.categories.len() {
                return bad(format!("model {m} has {} cells", row.len()));
            }
            if self.group_means[m].len() != groups {
                return bad(format!("model {m} has {} group means", self.group_means[m].len()));
            }
        }
        for r in &self.ranks {
            if r.ranks.len() != n {
                return bad(format!("rank row `{}` has wrong length", r.scope));
            }
        }
        Ok(())
    }
}
