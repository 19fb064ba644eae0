//! Confusion-table metrics.

use crate::error::{Error, Result};

/// (balanced accuracy, sensitivity, specificity) from confusion counts.
/// Both classes must be present in the evaluated set.
pub fn compute_metrics(tp: usize, fp: usize, tn: usize, fn_: usize) -> Result<(f64, f64, f64)> {
    if tp + fn_ == 0 {
        return Err(Error::Metric("no positive examples in test fold".into()));
    }
    if tn + fp == 0 {
        return Err(Error::Metric("no negative examples in test fold".into()));
    }
    let sens = tp as f64 / (tp + fn_) as f64;
    let spec = tn as f64 / (tn + fp) as f64;
    Ok(((sens + spec) / 2.0, sens, spec))
}

/// Mean and sample standard deviation (n-1); one value has std 0.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_confusion_table() {
        let (bal, sens, spec) = compute_metrics(5, 2, 8, 5).unwrap();
        assert_eq!(bal, 0.65);
        assert_eq!(sens, 0.5);
        assert_eq!(spec, 0.8);
    }

    #[test]
    fn perfect_classifier() {
        assert_eq!(compute_metrics(10, 0, 10, 0).unwrap(), (1.0, 1.0, 1.0));
    }

    #[test]
    fn all_positive_predictor_on_balanced_fold() {
        let (bal, sens, spec) = compute_metrics(10, 10, 0, 0).unwrap();
        assert_eq!((bal, sens, spec), (0.5, 1.0, 0.0));
    }

    #[test]
    fn balanced_accuracy_is_mean_of_rates() {
        for (tp, fp, tn, fn_) in [(3, 1, 4, 2), (1, 9, 1, 9), (7, 0, 1, 3)] {
            let (bal, sens, spec) = compute_metrics(tp, fp, tn, fn_).unwrap();
            assert_eq!(bal, (sens + spec) / 2.0);
            assert!((0.0..=1.0).contains(&bal));
        }
    }

    #[test]
    fn empty_class_rejected() {
        assert!(matches!(compute_metrics(0, 3, 7, 0), Err(Error::Metric(_))));
        assert!(matches!(compute_metrics(5, 0, 0, 5), Err(Error::Metric(_))));
    }

    #[test]
    fn sample_std_uses_n_minus_one() {
        let (mean, std) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(mean, 2.0);
        assert!((std - 1.0).abs() < 1e-12);
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
    }
}
