use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Per-iteration similarities s^(1..T) against the seed image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySeries(Vec<f64>);

impl SimilaritySeries {
    pub fn new(values: Vec<f64>) -> Result<Self, MetricsError> {
        if values.is_empty() {
            return Err(MetricsError::EmptySeries);
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
                return Err(MetricsError::InvalidSeriesValue { t: i + 1, value: v });
            }
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn gc(&self) -> f64 {
        weighted_by_iteration(&self.0)
    }
}

/// Per-iteration FID distances fid^(1..T) between the seed set and generation t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidSeries(Vec<f64>);

impl FidSeries {
    pub fn new(values: Vec<f64>) -> Result<Self, MetricsError> {
        if values.is_empty() {
            return Err(MetricsError::EmptySeries);
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(MetricsError::InvalidSeriesValue { t: i + 1, value: v });
            }
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn gc(&self) -> f64 {
        weighted_by_iteration(&self.0)
    }
}

// sum(t * x_t) / sum(t), t = 1..=T
fn weighted_by_iteration(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let weight_sum = n * (n + 1.0) / 2.0;
    let weighted: f64 = values
        .iter()
        .enumerate()
        .map(|(i, v)| (i + 1) as f64 * v)
        .sum();
    weighted / weight_sum
}

/// GC@T: similarities weighted by iteration index, so later drift counts more.
pub fn gc_at_t(series: &[f64]) -> Result<f64, MetricsError> {
    SimilaritySeries::new(series.to_vec()).map(|s| s.gc())
}

/// GC_FID@T: the same weighting applied to FID distances. Lower is better.
pub fn gc_fid_at_t(series: &[f64]) -> Result<f64, MetricsError> {
    FidSeries::new(series.to_vec()).map(|s| s.gc())
}
