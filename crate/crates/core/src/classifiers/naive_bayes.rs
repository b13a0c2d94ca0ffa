//! Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

use crate::data_model::Matrix;

/// Relative variance floor, scaled by the largest per-feature variance.
pub const VAR_SMOOTHING: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClassStats {
    log_prior: f64,
    means: Vec<f64>,
    vars: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// `None` for classes without training rows; they are never predicted.
    classes: Vec<Option<ClassStats>>,
}

fn variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64
}

impl GaussianNb {
    pub(crate) fn fit(x: &Matrix, y: &[usize], n_classes: usize) -> Self {
        let m = x.cols();
        let n = y.len();
        let max_var = (0..m)
            .map(|f| variance((0..n).map(|r| x.get(r, f))))
            .fold(0.0, f64::max);
        let floor = if max_var > 0.0 { VAR_SMOOTHING * max_var } else { VAR_SMOOTHING };

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
        for (r, &c) in y.iter().enumerate() {
            members[c].push(r);
        }
        let classes = members
            .iter()
            .map(|rows| {
                if rows.is_empty() {
                    return None;
                }
                let k = rows.len() as f64;
                let means: Vec<f64> = (0..m).map(|f| rows.iter().map(|&r| x.get(r, f)).sum::<f64>() / k).collect();
                let vars = (0..m)
                    .map(|f| variance(rows.iter().map(|&r| x.get(r, f))) + floor)
                    .collect();
                Some(ClassStats { log_prior: (k / n as f64).ln(), means, vars })
            })
            .collect();
        GaussianNb { classes }
    }

    fn joint_log_likelihood(stats: &ClassStats, row: &[f64]) -> f64 {
        let mut ll = stats.log_prior;
        for ((&v, &mu), &var) in row.iter().zip(&stats.means).zip(&stats.vars) {
            let d = v - mu;
            ll -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + d * d / var);
        }
        ll
    }

    /// Highest posterior class; ties go to the lower class id.
    pub fn predict_row(&self, row: &[f64]) -> usize {
        let mut best: Option<(usize, f64)> = None;
        for (c, stats) in self.classes.iter().enumerate() {
            let Some(stats) = stats else { continue };
            let ll = Self::joint_log_likelihood(stats, row);
            if best.is_none_or(|(_, b)| ll > b) {
                best = Some((c, ll));
            }
        }
        best.map_or(0, |(c, _)| c)
    }
}
