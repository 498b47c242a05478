use super::MetricsError;
use crate::model::Direction;

/// Competition ranks: rank 1 is best, tied scores share the smallest rank
/// (so `(5, 5, 3)` ranks as `(1, 1, 3)`).
pub fn rank_models(scores: &[f64], direction: Direction) -> Result<Vec<u32>, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::NoScores);
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFiniteScore(i));
    }
    let oriented: Vec<f64> = scores.iter().map(|&s| direction.oriented(s)).collect();
    Ok(oriented
        .iter()
        .map(|&mine| 1 + oriented.iter().filter(|&&other| other > mine).count() as u32)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ties_share_minimum_rank() {
        assert_eq!(
            rank_models(&[5.0, 5.0, 3.0], Direction::HigherBetter).unwrap(),
            vec![1, 1, 3]
        );
    }

    #[test]
    fn lower_better_reverses() {
        assert_eq!(
            rank_models(&[1.0, 3.0, 2.0], Direction::LowerBetter).unwrap(),
            vec![1, 3, 2]
        );
    }

    #[test]
    fn single_model_ranks_first() {
        assert_eq!(rank_models(&[0.1], Direction::HigherBetter).unwrap(), vec![1]);
    }

    #[test]
    fn nan_rejected() {
        assert_eq!(
            rank_models(&[1.0, f64::NAN], Direction::HigherBetter),
            Err(MetricsError::NonFiniteScore(1))
        );
        assert_eq!(rank_models(&[], Direction::HigherBetter), Err(MetricsError::NoScores));
    }

    proptest! {
        #[test]
        fn invariant_under_increasing_transform(
            raw in proptest::collection::vec(-800i32..800, 1..12),
            scale in 0.5f64..50.0,
            shift in -10.0f64..10.0,
        ) {
            // Grid values keep the transforms strictly increasing in floating point.
            let scores: Vec<f64> = raw.iter().map(|&r| r as f64 / 8.0).collect();
            let transforms: [Box<dyn Fn(f64) -> f64>; 3] = [
                Box::new(move |x| scale * x + shift),
                Box::new(|x: f64| x.powi(3)),
                Box::new(|x: f64| (x / 100.0).exp()),
            ];
            for f in &transforms {
                let transformed: Vec<f64> = scores.iter().map(|&s| f(s)).collect();
                for d in [Direction::HigherBetter, Direction::LowerBetter] {
                    prop_assert_eq!(rank_models(&scores, d).unwrap(), rank_models(&transformed, d).unwrap());
                }
            }
        }
    }
}
