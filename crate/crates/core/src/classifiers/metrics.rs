//! Confusion matrices and macro-averaged F1.

use serde::{Deserialize, Serialize};

use super::ClassifierError;

/// `counts[i][j]` = number of rows of true class `j` predicted as class `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Self {
        let n = counts.len();
        assert!(counts.iter().all(|r| r.len() == n), "confusion matrix must be square");
        ConfusionMatrix { counts }
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    #[inline]
    pub fn get(&self, predicted: usize, actual: usize) -> u64 {
        self.counts[predicted][actual]
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    /// Rows of each true class.
    pub fn column_sums(&self) -> Vec<u64> {
        (0..self.n()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn is_diagonal(&self) -> bool {
        self.counts
            .iter()
            .enumerate()
            .all(|(i, r)| r.iter().enumerate().all(|(j, &v)| i == j || v == 0))
    }
}

pub fn confusion(truth: &[usize], predicted: &[usize], n_classes: usize) -> Result<ConfusionMatrix, ClassifierError> {
    if truth.len() != predicted.len() {
        return Err(ClassifierError::LengthMismatch { truth: truth.len(), predicted: predicted.len() });
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= n_classes || p >= n_classes {
            return Err(ClassifierError::LabelOutOfRange { label: t.max(p), n_classes });
        }
        counts[p][t] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Unweighted mean over all classes of per-class F1, with 0/0 taken as 0.
pub fn macro_f1(cm: &ConfusionMatrix) -> f64 {
    let n = cm.n();
    if n == 0 {
        return 0.0;
    }
    let col = cm.column_sums();
    let total: f64 = (0..n)
        .map(|i| {
            let tp = cm.get(i, i);
            let predicted: u64 = cm.counts[i].iter().sum();
            // F1 = 2tp / (2tp + fp + fn) = 2tp / (predicted_i + actual_i)
            let denom = predicted + col[i];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp as f64 / denom as f64
            }
        })
        .sum();
    total / n as f64
}
