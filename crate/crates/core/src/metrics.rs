//! Classification error, per-group false negative rates and the
//! interpolation threshold of a width sweep.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub error: f64,
    pub fnr_a0: f64,
    pub fnr_a1: f64,
    /// `|fnr_a0 - fnr_a1|`
    pub fnr_gap: f64,
    /// Row counts indexed `[y][a]`.
    pub counts: [[usize; 2]; 2],
}

fn check_lengths(predictions: &[u8], labels: &[u8], attrs: &[u8]) -> Result<()> {
    if labels.len() != predictions.len() || attrs.len() != predictions.len() {
        return Err(Error::DimensionMismatch {
            expected: predictions.len(),
            actual: if labels.len() != predictions.len() { labels.len() } else { attrs.len() },
            context: "labels/attrs vs predictions",
        });
    }
    if predictions.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    Ok(())
}

/// Misclassification fraction.
pub fn error_rate(predictions: &[u8], labels: &[u8]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: predictions.len(),
            actual: labels.len(),
            context: "labels vs predictions",
        });
    }
    if predictions.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let wrong = predictions.iter().zip(labels).filter(|(p, y)| p != y).count();
    Ok(wrong as f64 / predictions.len() as f64)
}

/// Error and equality-of-opportunity gap of hard predictions.
///
/// An empty positive subgroup makes its FNR undefined and is an error.
pub fn evaluate(predictions: &[u8], labels: &[u8], attrs: &[u8]) -> Result<EvalReport> {
    check_lengths(predictions, labels, attrs)?;
    let mut counts = [[0usize; 2]; 2];
    let mut misses = [0usize; 2];
    let mut wrong = 0usize;
    for ((&p, &y), &a) in predictions.iter().zip(labels).zip(attrs) {
        counts[y as usize][a as usize] += 1;
        if p != y {
            wrong += 1;
            if y == 1 {
                misses[a as usize] += 1;
            }
        }
    }
    for attr in 0..2u8 {
        if counts[1][attr as usize] == 0 {
            return Err(Error::MissingSubgroup { attr });
        }
    }
    let fnr_a0 = misses[0] as f64 / counts[1][0] as f64;
    let fnr_a1 = misses[1] as f64 / counts[1][1] as f64;
    Ok(EvalReport {
        error: wrong as f64 / predictions.len() as f64,
        fnr_a0,
        fnr_a1,
        fnr_gap: (fnr_a0 - fnr_a1).abs(),
        counts,
    })
}

/// Smallest width whose train error is at most `tolerance`.
///
/// `table` holds `(width, train_error)` pairs with strictly increasing widths.
pub fn interpolation_threshold(table: &[(usize, f64)], tolerance: f64) -> Result<usize> {
    if table.is_empty() {
        return Err(Error::Empty("width table"));
    }
    if table.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidConfig("widths must be strictly increasing".into()));
    }
    table
        .iter()
        .find(|(_, err)| *err <= tolerance)
        .map(|(w, _)| *w)
        .ok_or(Error::NoInterpolation { tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let y = [1, 0, 1, 1, 0];
        let a = [0, 0, 1, 1, 1];
        let r = evaluate(&y, &y, &a).unwrap();
        assert_eq!((r.error, r.fnr_gap), (0.0, 0.0));
        assert_eq!(r.counts.iter().flatten().sum::<usize>(), 5);
    }

    #[test]
    fn hand_counted_gap() {
        let r = evaluate(&[1, 0, 1, 1], &[1, 1, 1, 1], &[0, 0, 1, 1]).unwrap();
        assert_eq!((r.fnr_a0, r.fnr_a1, r.fnr_gap), (0.5, 0.0, 0.5));
        assert_eq!(r.error, 0.25);
    }

    #[test]
    fn all_positive_predictor() {
        let y = [1, 0, 0, 1, 0, 1];
        let a = [0, 1, 0, 1, 1, 0];
        let r = evaluate(&[1; 6], &y, &a).unwrap();
        assert_eq!((r.fnr_a0, r.fnr_a1, r.fnr_gap), (0.0, 0.0, 0.0));
        assert_eq!(r.error, 0.5);
    }

    #[test]
    fn missing_positive_subgroup_is_an_error() {
        let err = evaluate(&[1, 1], &[1, 0], &[0, 1]).unwrap_err();
        assert!(matches!(err, Error::MissingSubgroup { attr: 1 }));
    }

    #[test]
    fn interpolation_threshold_examples() {
        assert_eq!(interpolation_threshold(&[(100, 0.05), (400, 0.0), (1000, 0.0)], 0.0).unwrap(), 400);
        assert!(matches!(
            interpolation_threshold(&[(10, 0.1), (20, 0.01)], 0.0),
            Err(Error::NoInterpolation { .. })
        ));
        assert_eq!(interpolation_threshold(&[(10, 0.0)], 0.0).unwrap(), 10);
        assert!(interpolation_threshold(&[(20, 0.0), (10, 0.0)], 0.0).is_err());
        assert_eq!(interpolation_threshold(&[(10, 0.02), (20, 0.004)], 0.005).unwrap(), 20);
    }
}
