use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const CLASSES: usize = 4;

/// `100 · correct / total`.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    check_lengths(predictions, labels)?;
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(100.0 * correct as f64 / labels.len() as f64)
}

fn check_lengths(predictions: &[usize], labels: &[usize]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::Empty("labels".into()));
    }
    if predictions.len() != labels.len() {
        return Err(Error::InvalidConfig(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; CLASSES]; CLASSES],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..CLASSES).map(|i| self.counts[i][i]).sum()
    }

    /// Percentage of the diagonal; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            100.0 * self.trace() as f64 / total as f64
        }
    }
}

pub fn confusion_matrix(predictions: &[usize], labels: &[usize]) -> Result<ConfusionMatrix> {
    check_lengths(predictions, labels)?;
    let mut m = ConfusionMatrix::default();
    for (&p, &t) in predictions.iter().zip(labels) {
        for idx in [p, t] {
            if idx >= CLASSES {
                return Err(Error::ClassOutOfRange {
                    index: idx,
                    classes: CLASSES,
                });
            }
        }
        m.counts[t][p] += 1;
    }
    Ok(m)
}

/// Fold-level summary for one model. Standard deviation is the population
/// form (divide by the number of folds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub folds: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub min_accuracy: f64,
    pub max_accuracy: f64,
    pub range_accuracy: f64,
    pub mean_loss: f64,
    pub mean_epochs: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn aggregate_stats(accuracies: &[f64], losses: &[f64], epochs: &[f64]) -> Result<AggregateStats> {
    if accuracies.is_empty() {
        return Err(Error::Empty("no successful folds".into()));
    }
    if losses.len() != accuracies.len() || epochs.len() != accuracies.len() {
        return Err(Error::InvalidConfig("fold metric lists differ in length".into()));
    }
    // sort first so the result does not depend on fold order
    let sorted = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s
    };
    let acc = sorted(accuracies);
    let m = mean(&acc);
    let var = acc.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / acc.len() as f64;
    let (min, max) = (acc[0], acc[acc.len() - 1]);
    Ok(AggregateStats {
        folds: acc.len(),
        mean_accuracy: m,
        std_accuracy: var.sqrt(),
        min_accuracy: min,
        max_accuracy: max,
        range_accuracy: max - min,
        mean_loss: mean(&sorted(losses)),
        mean_epochs: mean(&sorted(epochs)),
    })
}

/// Relative drop in misclassification rate from `base` to `new` accuracy, in
/// percent: `100 · ((100 − base) − (100 − new)) / (100 − base)`.
pub fn error_reduction(base: f64, new: f64) -> Result<f64> {
    if base.is_nan() || base >= 100.0 {
        return Err(Error::InvalidConfig(format!(
            "base accuracy {base} leaves no errors to reduce"
        )));
    }
    let base_err = 100.0 - base;
    Ok(100.0 * (base_err - (100.0 - new)) / base_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_fixture() {
        assert_eq!(accuracy(&[0, 1, 2, 3, 0], &[0, 1, 2, 0, 1]).unwrap(), 60.0);
        assert_eq!(accuracy(&[2, 2], &[2, 2]).unwrap(), 100.0);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn single_confusion() {
        let m = confusion_matrix(&[2], &[1]).unwrap();
        let mut want = [[0u64; 4]; 4];
        want[1][2] = 1;
        assert_eq!(m.counts, want);
        assert!(confusion_matrix(&[4], &[1]).is_err());
    }

    #[test]
    fn hand_stats() {
        let s = aggregate_stats(&[90.0, 92.0, 94.0], &[0.3, 0.2, 0.1], &[10.0, 20.0, 30.0]).unwrap();
        assert!((s.mean_accuracy - 92.0).abs() < 1e-12);
        assert_eq!(s.range_accuracy, 4.0);
        assert!((s.std_accuracy - (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((s.std_accuracy - 1.633).abs() < 1e-3);
        assert!((s.mean_loss - 0.2).abs() < 1e-12);
        assert_eq!(s.mean_epochs, 20.0);
        let one = aggregate_stats(&[88.0], &[0.4], &[3.0]).unwrap();
        assert_eq!((one.std_accuracy, one.range_accuracy), (0.0, 0.0));
        let flat = aggregate_stats(&[70.0; 5], &[0.1; 5], &[1.0; 5]).unwrap();
        assert_eq!(flat.std_accuracy, 0.0);
        assert!(aggregate_stats(&[], &[], &[]).is_err());
    }

    #[test]
    fn reduction_cases() {
        assert!((error_reduction(86.9, 90.1).unwrap() - 24.427).abs() < 1e-3);
        assert_eq!(error_reduction(80.0, 80.0).unwrap(), 0.0);
        assert!((error_reduction(84.6, 89.2).unwrap() - 29.87).abs() < 1e-2);
        assert!(error_reduction(100.0, 100.0).is_err());
    }
}
