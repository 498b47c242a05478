use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{rank_models, MetricsError};
use crate::model::{
    CategoryId, CategorySet, Direction, RankRow, SampleId, ScoreTable, OVERALL_SCOPE,
};

/// One model's row of a score table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    /// Category means, aligned with the category set.
    pub cells: Vec<Option<f64>>,
    /// Number of samples behind each cell.
    pub counts: Vec<usize>,
    /// Unweighted mean of each group's present cells, in `groups()` order.
    pub group_means: Vec<Option<f64>>,
    /// Unweighted mean of all present category cells.
    pub overall: Option<f64>,
    /// Categories without any scored sample.
    pub missing: Vec<CategoryId>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Per-sample scores → category cells → group and overall means.
///
/// Each sample counts equally within its category; each category counts
/// equally in the group and overall means. The overall mean is therefore the
/// mean over categories, not the mean of the group means.
pub fn aggregate(
    per_sample: &BTreeMap<SampleId, f64>,
    categories: &BTreeMap<SampleId, CategoryId>,
    set: &CategorySet,
) -> Result<ScoreRow, MetricsError> {
    let mut sums = vec![0.0; set.len()];
    let mut counts = vec![0usize; set.len()];
    for (id, &score) in per_sample {
        let category = categories
            .get(id)
            .ok_or_else(|| MetricsError::MissingCategory(id.clone()))?;
        let idx = set.index_of(category).ok_or_else(|| {
            MetricsError::Invalid(format!("sample `{id}` has unknown category `{category}`"))
        })?;
        if !score.is_finite() {
            return Err(MetricsError::Invalid(format!("sample `{id}` score is not finite")));
        }
        sums[idx] += score;
        counts[idx] += 1;
    }
    let cells: Vec<Option<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &n)| (n > 0).then(|| s / n as f64))
        .collect();
    let mut row = aggregate_cells(&cells, set)?;
    row.counts = counts;
    Ok(row)
}

/// Group and overall means from already-computed category cells.
pub fn aggregate_cells(cells: &[Option<f64>], set: &CategorySet) -> Result<ScoreRow, MetricsError> {
    if cells.len() != set.len() {
        return Err(MetricsError::LengthMismatch {
            name: "cells".into(),
            len: cells.len(),
            expected: set.len(),
        });
    }
    let group_means = set
        .groups()
        .iter()
        .map(|g| {
            mean(
                set.entries()
                    .iter()
                    .zip(cells)
                    .filter(|(e, _)| &e.group == g)
                    .filter_map(|(_, c)| *c),
            )
        })
        .collect();
    let missing = set
        .categories()
        .zip(cells)
        .filter(|(_, c)| c.is_none())
        .map(|(name, _)| name.clone())
        .collect();
    Ok(ScoreRow {
        cells: cells.to_vec(),
        counts: cells.iter().map(|c| usize::from(c.is_some())).collect(),
        group_means,
        overall: mean(cells.iter().filter_map(|c| *c)),
        missing,
    })
}

fn rank_scope(values: &[Option<f64>], direction: Direction) -> Result<Vec<Option<u32>>, MetricsError> {
    let present: Vec<f64> = values.iter().filter_map(|v| *v).collect();
    if present.is_empty() {
        return Ok(vec![None; values.len()]);
    }
    let mut ranks = rank_models(&present, direction)?.into_iter();
    Ok(values
        .iter()
        .map(|v| v.and_then(|_| ranks.next()))
        .collect())
}

/// Assembles a score table from one row per model and ranks every scope.
pub fn score_table(
    metric: impl Into<String>,
    direction: Direction,
    decimals: usize,
    set: &CategorySet,
    rows: Vec<(String, ScoreRow)>,
) -> Result<ScoreTable, MetricsError> {
    let groups = set.groups();
    let mut models = Vec::with_capacity(rows.len());
    let mut cells = Vec::with_capacity(rows.len());
    let mut group_means = Vec::with_capacity(rows.len());
    let mut overall_mean = Vec::with_capacity(rows.len());
    for (model, row) in rows {
        if row.cells.len() != set.len() || row.group_means.len() != groups.len() {
            return Err(MetricsError::Invalid(format!(
                "row for `{model}` does not match the category set"
            )));
        }
        if models.contains(&model) {
            return Err(MetricsError::Invalid(format!("duplicate model `{model}`")));
        }
        models.push(model);
        cells.push(row.cells);
        group_means.push(row.group_means);
        overall_mean.push(row.overall);
    }
    let mut ranks = Vec::with_capacity(groups.len() + 1);
    for (gi, g) in groups.iter().enumerate() {
        let values: Vec<Option<f64>> = group_means.iter().map(|r| r[gi]).collect();
        ranks.push(RankRow {
            scope: g.to_string(),
            ranks: rank_scope(&values, direction)?,
        });
    }
    ranks.push(RankRow {
        scope: OVERALL_SCOPE.into(),
        ranks: rank_scope(&overall_mean, direction)?,
    });
    Ok(ScoreTable {
        metric: metric.into(),
        direction,
        decimals,
        models,
        categories: set.clone(),
        cells,
        group_means,
        overall_mean,
        ranks,
    })
}

/// Relative gap of `human` over `best_model`, in percent.
pub fn delta_percent(human: f64, best_model: f64) -> Result<f64, MetricsError> {
    if best_model == 0.0 {
        return Err(MetricsError::ZeroDenominator);
    }
    Ok(100.0 * (human - best_model) / best_model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CategoryEntry, GroupId};

    fn small_set() -> CategorySet {
        CategorySet::new(vec![
            CategoryEntry { name: "a".into(), group: GroupId::new("g1") },
            CategoryEntry { name: "b".into(), group: GroupId::new("g1") },
            CategoryEntry { name: "c".into(), group: GroupId::new("g2") },
        ])
        .unwrap()
    }

    #[test]
    fn per_sample_mean_then_category_mean() {
        let set = small_set();
        let scores: BTreeMap<SampleId, f64> =
            [("a1", 0.2), ("a2", 0.4), ("b1", 0.9), ("c1", 0.1)]
                .into_iter()
                .map(|(k, v)| (SampleId::new(k), v))
                .collect();
        let cats: BTreeMap<SampleId, CategoryId> = scores
            .keys()
            .map(|k| (k.clone(), CategoryId::new(&k.as_str()[..1])))
            .collect();
        let row = aggregate(&scores, &cats, &set).unwrap();
        assert!((row.cells[0].unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(row.counts, vec![2, 1, 1]);
        assert!((row.group_means[0].unwrap() - 0.6).abs() < 1e-15);
        // Over categories (0.3, 0.9, 0.1), not over samples or groups.
        assert!((row.overall.unwrap() - 1.3 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_category_is_flagged_and_excluded() {
        let set = small_set();
        let scores: BTreeMap<SampleId, f64> = [(SampleId::new("a1"), 0.5)].into();
        let cats: BTreeMap<SampleId, CategoryId> = [(SampleId::new("a1"), CategoryId::new("a"))].into();
        let row = aggregate(&scores, &cats, &set).unwrap();
        assert_eq!(row.cells, vec![Some(0.5), None, None]);
        assert_eq!(row.missing, vec![CategoryId::new("b"), CategoryId::new("c")]);
        assert_eq!(row.group_means, vec![Some(0.5), None]);
        assert_eq!(row.overall, Some(0.5));
    }

    #[test]
    fn sample_without_category_is_an_error() {
        let scores: BTreeMap<SampleId, f64> = [(SampleId::new("x"), 0.5)].into();
        assert_eq!(
            aggregate(&scores, &BTreeMap::new(), &small_set()),
            Err(MetricsError::MissingCategory("x".into()))
        );
    }

    #[test]
    fn single_model_table_ranks_first_everywhere() {
        let set = small_set();
        let row = aggregate_cells(&[Some(0.1), Some(0.2), Some(0.3)], &set).unwrap();
        let t = score_table("gc", Direction::HigherBetter, 3, &set, vec![("m".into(), row)]).unwrap();
        t.check_shape().unwrap();
        assert!(t.ranks.iter().all(|r| r.ranks == vec![Some(1)]));
    }

    #[test]
    fn delta_examples() {
        assert!((delta_percent(0.6402, 0.5841).unwrap() - 9.6045).abs() < 1e-4);
        assert!((delta_percent(0.5476, 0.4882).unwrap() - 12.1671).abs() < 1e-4);
        assert_eq!(delta_percent(0.5, 0.5).unwrap(), 0.0);
        assert_eq!(delta_percent(0.5, 0.0), Err(MetricsError::ZeroDenominator));
    }
}
