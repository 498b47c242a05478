use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::MetricsError;
use crate::model::FeatureStats;

/// Eigenvalues below this are treated as exact zeros when taking square roots.
const EIGEN_FLOOR: f64 = 1e-12;
/// Negative FID results down to this value are rounding noise and clamp to 0.
const NEGATIVE_SLACK: f64 = -1e-6;
const MAX_EIGEN_SWEEPS: usize = 10_000;

/// Sample mean and unbiased (n - 1) covariance of a set of feature vectors.
pub fn gaussian_stats(
    features: &[Vec<f64>],
    feature_id: impl Into<String>,
) -> Result<FeatureStats, MetricsError> {
    let n = features.len();
    if n < 2 {
        return Err(MetricsError::InsufficientSamples(n));
    }
    let dim = features[0].len();
    if dim == 0 {
        return Err(MetricsError::Invalid("zero-dimensional features".into()));
    }
    for f in features {
        if f.len() != dim {
            return Err(MetricsError::DimensionMismatch(dim, f.len()));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::Invalid("non-finite feature value".into()));
        }
    }

    let mut mean = DVector::<f64>::zeros(dim);
    for f in features {
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v;
        }
    }
    mean /= n as f64;

    let mut centered = DMatrix::<f64>::zeros(n, dim);
    for (i, f) in features.iter().enumerate() {
        for j in 0..dim {
            centered[(i, j)] = f[j] - mean[j];
        }
    }
    let mut cov = centered.tr_mul(&centered) / (n as f64 - 1.0);
    // Mirror the upper triangle so the result is exactly symmetric.
    for i in 0..dim {
        for j in (i + 1)..dim {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    FeatureStats::new(mean, cov, n, feature_id).map_err(|e| MetricsError::Invalid(e.to_string()))
}

fn symmetric_eigen(m: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>, MetricsError> {
    SymmetricEigen::try_new(m, f64::EPSILON, MAX_EIGEN_SWEEPS).ok_or(MetricsError::SqrtDidNotConverge)
}

fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>, MetricsError> {
    let eig = symmetric_eigen(m.clone())?;
    let roots = eig
        .eigenvalues
        .map(|l| if l < EIGEN_FLOOR { 0.0 } else { l.sqrt() });
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

/// Tr((A B)^{1/2}) computed as Tr((A^{1/2} B A^{1/2})^{1/2}), which keeps every
/// intermediate symmetric positive semi-definite.
fn trace_sqrt_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64, MetricsError> {
    let sa = psd_sqrt(a)?;
    let inner = &sa * b * &sa;
    let inner = (&inner + inner.transpose()) * 0.5;
    let eig = symmetric_eigen(inner)?;
    Ok(eig
        .eigenvalues
        .iter()
        .map(|&l| if l < EIGEN_FLOOR { 0.0 } else { l.sqrt() })
        .sum())
}

/// Fréchet distance between two Gaussian feature summaries:
/// ‖μa − μb‖² + Tr(Σa + Σb − 2(Σa Σb)^{1/2}).
pub fn fid(a: &FeatureStats, b: &FeatureStats) -> Result<f64, MetricsError> {
    if a.feature_id != b.feature_id {
        return Err(MetricsError::FeatureMismatch(
            a.feature_id.clone(),
            b.feature_id.clone(),
        ));
    }
    if a.dim() != b.dim() {
        return Err(MetricsError::DimensionMismatch(a.dim(), b.dim()));
    }
    let mean_term = (&a.mean - &b.mean).norm_squared();
    let cross = trace_sqrt_product(&a.cov, &b.cov)?;
    let value = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * cross;
    if !value.is_finite() || value < NEGATIVE_SLACK {
        return Err(MetricsError::NumericalInstability(value));
    }
    Ok(value.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats_1d(mu: f64, var: f64) -> FeatureStats {
        FeatureStats::new(
            DVector::from_vec(vec![mu]),
            DMatrix::from_vec(1, 1, vec![var]),
            10,
            "f",
        )
        .unwrap()
    }

    #[test]
    fn stats_two_points() {
        let s = gaussian_stats(&[vec![0.0, 0.0], vec![2.0, 2.0]], "f").unwrap();
        assert_eq!(s.mean.as_slice(), &[1.0, 1.0]);
        assert_eq!(s.cov, DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]));
    }

    #[test]
    fn stats_unit_vectors() {
        let s = gaussian_stats(&[vec![1.0, 0.0], vec![0.0, 1.0]], "f").unwrap();
        assert_eq!(s.mean.as_slice(), &[0.5, 0.5]);
        assert_eq!(s.cov, DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]));
    }

    #[test]
    fn stats_identical_vectors_have_zero_cov() {
        let v = vec![0.25, -3.0, 7.5];
        let s = gaussian_stats(&vec![v.clone(); 5], "f").unwrap();
        assert_eq!(s.mean.as_slice(), v.as_slice());
        assert!(s.cov.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn stats_need_two_samples() {
        assert_eq!(
            gaussian_stats(&[vec![1.0]], "f"),
            Err(MetricsError::InsufficientSamples(1))
        );
    }

    #[test]
    fn fid_one_dimensional_examples() {
        assert!((fid(&stats_1d(0.0, 1.0), &stats_1d(3.0, 1.0)).unwrap() - 9.0).abs() < 1e-12);
        assert!((fid(&stats_1d(0.0, 4.0), &stats_1d(0.0, 1.0)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fid_identical_is_zero() {
        let s = gaussian_stats(
            &[vec![1.0, 2.0, 0.5], vec![0.0, 1.0, 3.0], vec![2.0, -1.0, 1.0]],
            "f",
        )
        .unwrap();
        assert!(fid(&s, &s).unwrap().abs() < 1e-6);
    }

    #[test]
    fn fid_rejects_feature_mismatch() {
        let a = stats_1d(0.0, 1.0);
        let mut b = stats_1d(0.0, 1.0);
        b.feature_id = "other".into();
        assert!(matches!(fid(&a, &b), Err(MetricsError::FeatureMismatch(..))));
    }
}
