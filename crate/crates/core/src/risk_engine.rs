//! Cyber-risk scoring of a feature selection.
//!
//! The confusion matrix of a classifier trained on the selected columns is
//! column-normalized into conditional misclassification probabilities, and
//! the risk is the loss-weighted sum of those probabilities.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{self, ClassifierConfig, ClassifierError, ConfusionMatrix};
use crate::cost_model::{selection_cost, CostVector};
use crate::data_model::{project, Dataset, SelectionVector, Split};
use crate::loss_model::LossMatrix;

/// Risk value standing in for zero when computing `1 / risk`.
pub const ZERO_RISK_EPSILON: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum RiskError {
    #[error("probability matrix is {probs}x{probs} but loss matrix is {loss}x{loss}")]
    DimensionMismatch { probs: usize, loss: usize },
    #[error("loss matrix covers {loss} devices, dataset has {classes}")]
    LossSize { loss: usize, classes: usize },
    #[error("cost vector has {costs} entries, dataset has {features} features")]
    CostSize { costs: usize, features: usize },
    #[error("selection has {found} entries, dataset has {expected} features")]
    SelectionSize { expected: usize, found: usize },
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

/// `probs[i][j]` estimates Pr(predicted = i | true = j).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisclassMatrix {
    probs: Vec<Vec<f64>>,
}

impl MisclassMatrix {
    /// Wraps a raw square matrix without checking column sums.
    pub fn from_raw(probs: Vec<Vec<f64>>) -> Self {
        MisclassMatrix { probs }
    }

    pub fn n(&self) -> usize {
        self.probs.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.probs
    }
}

/// Column-normalizes a confusion matrix. A class with no test rows gets the
/// identity column.
pub fn misclass_probs(cm: &ConfusionMatrix) -> MisclassMatrix {
    let n = cm.n();
    let sums = cm.column_sums();
    let probs = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match sums[j] {
                    0 => (i == j) as u8 as f64,
                    s => cm.get(i, j) as f64 / s as f64,
                })
                .collect()
        })
        .collect();
    MisclassMatrix { probs }
}

/// Sum over all (i, j) of `probs[i][j] * loss[i][j]`.
pub fn risk_score(probs: &MisclassMatrix, loss: &LossMatrix) -> Result<f64, RiskError> {
    if probs.n() != loss.n() {
        return Err(RiskError::DimensionMismatch { probs: probs.n(), loss: loss.n() });
    }
    Ok(probs
        .probs
        .iter()
        .zip(loss.rows())
        .flat_map(|(p, l)| p.iter().zip(l).map(|(a, b)| a * b))
        .sum())
}

pub fn utility(risk: f64) -> f64 {
    if risk > 0.0 {
        1.0 / risk
    } else {
        1.0 / ZERO_RISK_EPSILON
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub selection: SelectionVector,
    pub risk: f64,
    pub utility: f64,
    pub total_cost: f64,
    pub confusion: ConfusionMatrix,
    pub macro_f1: f64,
    pub wall_time_ms: f64,
}

/// Bundles everything needed to score selections on one dataset and split.
#[derive(Debug, Clone, Copy)]
pub struct Evaluator<'a> {
    pub dataset: &'a Dataset,
    pub split: &'a Split,
    pub costs: &'a CostVector,
    pub loss: &'a LossMatrix,
    pub classifier: &'a ClassifierConfig,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        dataset: &'a Dataset,
        split: &'a Split,
        costs: &'a CostVector,
        loss: &'a LossMatrix,
        classifier: &'a ClassifierConfig,
    ) -> Result<Self, RiskError> {
        if loss.n() != dataset.n_classes() {
            return Err(RiskError::LossSize { loss: loss.n(), classes: dataset.n_classes() });
        }
        if costs.len() != dataset.n_features() {
            return Err(RiskError::CostSize { costs: costs.len(), features: dataset.n_features() });
        }
        Ok(Evaluator { dataset, split, costs, loss, classifier })
    }

    pub fn n_features(&self) -> usize {
        self.dataset.n_features()
    }

    pub fn evaluate(&self, selection: &SelectionVector) -> Result<RiskReport, RiskError> {
        if selection.len() != self.n_features() {
            return Err(RiskError::SelectionSize { expected: self.n_features(), found: selection.len() });
        }
        let start = Instant::now();
        let n = self.dataset.n_classes();
        let (x_train, y_train) = project(self.dataset, &self.split.train, selection);
        let (x_test, y_test) = project(self.dataset, &self.split.test, selection);
        let model = classifiers::fit(&x_train, &y_train, n, self.classifier)?;
        let predicted = classifiers::predict(&model, &x_test)?;
        let confusion = classifiers::confusion(&y_test, &predicted, n)?;
        let risk = risk_score(&misclass_probs(&confusion), self.loss)?;
        Ok(RiskReport {
            selection: selection.clone(),
            risk,
            utility: utility(risk),
            total_cost: selection_cost(self.costs, selection),
            macro_f1: classifiers::macro_f1(&confusion),
            confusion,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }
}

/// Trains on the selected columns of the train split and scores the test split.
pub fn evaluate_selection(
    dataset: &Dataset,
    split: &Split,
    selection: &SelectionVector,
    costs: &CostVector,
    loss: &LossMatrix,
    classifier: &ClassifierConfig,
) -> Result<RiskReport, RiskError> {
    Evaluator::new(dataset, split, costs, loss, classifier)?.evaluate(selection)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{stratified_split, DeviceLabel, Matrix};
    use proptest::prelude::*;

    fn cm(rows: Vec<Vec<u64>>) -> ConfusionMatrix {
        ConfusionMatrix::from_counts(rows)
    }

    fn swap_loss() -> LossMatrix {
        LossMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn probs_examples() {
        let p = misclass_probs(&cm(vec![vec![3, 0], vec![0, 2]]));
        assert_eq!(p.rows(), &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let p = misclass_probs(&cm(vec![vec![8, 2], vec![2, 8]]));
        assert_eq!(p.rows(), &[vec![0.8, 0.2], vec![0.2, 0.8]]);
        let p = misclass_probs(&cm(vec![vec![5, 0], vec![1, 0]]));
        assert_eq!(p.get(0, 1), 0.0);
        assert_eq!(p.get(1, 1), 1.0);
    }

    #[test]
    fn risk_examples() {
        let identity = MisclassMatrix::from_raw(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(risk_score(&identity, &swap_loss()).unwrap(), 0.0);
        let p = MisclassMatrix::from_raw(vec![vec![0.8, 0.2], vec![0.2, 0.8]]);
        assert!((risk_score(&p, &swap_loss()).unwrap() - 0.4).abs() < 1e-15);
        let three = LossMatrix::new(vec![vec![0.0; 3]; 3]).unwrap();
        assert_eq!(
            risk_score(&p, &three),
            Err(RiskError::DimensionMismatch { probs: 2, loss: 3 })
        );
    }

    #[test]
    fn utility_sentinel() {
        assert_eq!(utility(0.0), 1e12);
        assert_eq!(utility(0.5), 2.0);
    }

    fn two_class_dataset(separable: bool) -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let class = i % 2;
            let v = if separable { class as f64 * 10.0 + (i as f64) * 0.01 } else { i as f64 };
            rows.push(vec![v]);
            labels.push(class);
        }
        let devices = (0..2)
            .map(|id| DeviceLabel { id, type_name: format!("t{id}"), brand: "b".into(), display_name: format!("d{id}") })
            .collect();
        Dataset::new(Matrix::from_rows(&rows), labels, vec!["f".into()], devices).unwrap()
    }

    #[test]
    fn separable_data_has_zero_risk() {
        let ds = two_class_dataset(true);
        let split = stratified_split(&ds, 0.7, 1).unwrap();
        let costs = CostVector::new(vec![1.0]).unwrap();
        let r = evaluate_selection(&ds, &split, &SelectionVector::full(1), &costs, &swap_loss(), &ClassifierConfig::tree())
            .unwrap();
        assert_eq!(r.risk, 0.0);
        assert_eq!(r.utility, 1e12);
        assert_eq!(r.macro_f1, 1.0);
        assert_eq!(r.total_cost, 1.0);
    }

    #[test]
    fn empty_selection_on_balanced_data_has_unit_risk() {
        let ds = two_class_dataset(true);
        let split = stratified_split(&ds, 0.7, 1).unwrap();
        let costs = CostVector::new(vec![1.0]).unwrap();
        for cfg in [ClassifierConfig::tree(), ClassifierConfig::gnb()] {
            let r = evaluate_selection(&ds, &split, &SelectionVector::empty(1), &costs, &swap_loss(), &cfg).unwrap();
            assert_eq!(r.risk, 1.0);
            assert_eq!(r.total_cost, 0.0);
            // Majority leaf predicts class 0 on a tie.
            assert_eq!(r.confusion.counts(), &[vec![3, 3], vec![0, 0]]);
        }
    }

    #[test]
    fn evaluation_is_deterministic() {
        let ds = two_class_dataset(false);
        let split = stratified_split(&ds, 0.7, 9).unwrap();
        let costs = CostVector::new(vec![1.0]).unwrap();
        let cfg = ClassifierConfig::tree();
        let a = evaluate_selection(&ds, &split, &SelectionVector::full(1), &costs, &swap_loss(), &cfg).unwrap();
        let b = evaluate_selection(&ds, &split, &SelectionVector::full(1), &costs, &swap_loss(), &cfg).unwrap();
        assert_eq!((a.risk, &a.confusion), (b.risk, &b.confusion));
    }

    #[test]
    fn evaluator_checks_sizes() {
        let ds = two_class_dataset(true);
        let split = stratified_split(&ds, 0.7, 1).unwrap();
        let costs = CostVector::new(vec![1.0, 2.0]).unwrap();
        let cfg = ClassifierConfig::tree();
        assert!(matches!(
            Evaluator::new(&ds, &split, &costs, &swap_loss(), &cfg),
            Err(RiskError::CostSize { .. })
        ));
        let costs = CostVector::new(vec![1.0]).unwrap();
        let loss = swap_loss();
        let ev = Evaluator::new(&ds, &split, &costs, &loss, &cfg).unwrap();
        assert!(matches!(ev.evaluate(&SelectionVector::empty(3)), Err(RiskError::SelectionSize { .. })));
    }

    fn random_instance() -> impl Strategy<Value = (Vec<Vec<u64>>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        (2usize..7).prop_flat_map(|n| {
            let counts = prop::collection::vec(prop::collection::vec(0u64..20, n), n);
            let loss = || {
                prop::collection::vec(prop::collection::vec(0.0f64..5.0, n), n).prop_map(|mut l| {
                    for (i, row) in l.iter_mut().enumerate() {
                        row[i] = 0.0;
                    }
                    l
                })
            };
            (counts, loss(), loss())
        })
    }

    proptest! {
        #[test]
        fn probability_columns_and_risk_bounds((counts, l1, l2) in random_instance(), a in 0.0f64..3.0, b in 0.0f64..3.0) {
            let n = counts.len();
            let p = misclass_probs(&cm(counts));
            for j in 0..n {
                let s: f64 = (0..n).map(|i| p.get(i, j)).sum();
                prop_assert!((s - 1.0).abs() < 1e-9);
                prop_assert!((0..n).all(|i| (0.0..=1.0).contains(&p.get(i, j))));
            }
            let loss1 = LossMatrix::new(l1.clone()).unwrap();
            let loss2 = LossMatrix::new(l2.clone()).unwrap();
            let r1 = risk_score(&p, &loss1).unwrap();
            let r2 = risk_score(&p, &loss2).unwrap();
            let col_max: f64 = (0..n).map(|j| (0..n).map(|i| l1[i][j]).fold(0.0, f64::max)).sum();
            prop_assert!(r1 >= 0.0 && r1 <= col_max + 1e-12);
            prop_assert!(col_max <= n as f64 * loss1.max_entry());

            let combo: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a * l1[i][j] + b * l2[i][j]).collect()).collect();
            let rc = risk_score(&p, &LossMatrix::new(combo).unwrap()).unwrap();
            prop_assert!((rc - (a * r1 + b * r2)).abs() < 1e-9);
        }
    }
}
