use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::model::CorrelationKind;

/// Symmetric correlation matrix over named score vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub kind: CorrelationKind,
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.values[i][j])
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.names.len();
        self.values.len() == n
            && self.values.iter().all(|r| r.len() == n)
            && (0..n).all(|i| (0..n).all(|j| self.values[i][j] == self.values[j][i]))
    }
}

/// Pearson correlation coefficient, centered two-pass, clamped to [-1, 1].
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch {
            name: "y".into(),
            len: y.len(),
            expected: x.len(),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(MetricsError::ZeroVariance("x".into()));
    }
    if syy == 0.0 {
        return Err(MetricsError::ZeroVariance("y".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

// Average ranks (1-based) with ties sharing the mean of their positions.
fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Pairwise correlation of aligned per-model score vectors.
///
/// Every vector must have the same length (at least 3) and non-zero variance.
/// The diagonal is exactly 1 and the matrix exactly symmetric.
pub fn correlation_matrix(
    vectors: &[(String, Vec<f64>)],
    kind: CorrelationKind,
) -> Result<CorrelationMatrix, MetricsError> {
    let expected = vectors.first().map(|(_, v)| v.len()).unwrap_or(0);
    if expected < 3 {
        return Err(MetricsError::TooFewValues(expected));
    }
    for (name, v) in vectors {
        if v.len() != expected {
            return Err(MetricsError::LengthMismatch {
                name: name.clone(),
                len: v.len(),
                expected,
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(MetricsError::Invalid(format!("vector `{name}` has non-finite values")));
        }
        if v.iter().all(|x| *x == v[0]) {
            return Err(MetricsError::ZeroVariance(name.clone()));
        }
    }
    let prepared: Vec<Vec<f64>> = vectors
        .iter()
        .map(|(_, v)| match kind {
            CorrelationKind::Pearson => v.clone(),
            CorrelationKind::Spearman => fractional_ranks(v),
        })
        .collect();
    let n = vectors.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        values[i][i] = 1.0;
        for j in (i + 1)..n {
            let r = pearson(&prepared[i], &prepared[j]).map_err(|e| match e {
                MetricsError::ZeroVariance(_) => MetricsError::ZeroVariance(vectors[i].0.clone()),
                other => other,
            })?;
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        kind,
        names: vectors.iter().map(|(n, _)| n.clone()).collect(),
        values,
    })
}
