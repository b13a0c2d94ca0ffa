//! Deterministic classifiers used to score feature selections.
//!
//! Both models accept zero-column inputs and fall back to predicting the
//! majority training class, so an empty selection still has a well-defined
//! risk.

mod metrics;
mod naive_bayes;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{confusion, macro_f1, ConfusionMatrix};
pub use naive_bayes::GaussianNb;
pub use tree::DecisionTree;

use crate::data_model::Matrix;

#[derive(Debug, Error, PartialEq)]
pub enum ClassifierError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("{rows} training rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("model expects {expected} features, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{truth} true labels but {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("unknown classifier `{0}` (expected `tree` or `gnb`)")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    DecisionTree,
    GaussianNb,
}

impl FromStr for ClassifierKind {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tree" | "decision_tree" | "dt" => Ok(ClassifierKind::DecisionTree),
            "gnb" | "gaussian_nb" | "nb" => Ok(ClassifierKind::GaussianNb),
            other => Err(ClassifierError::UnknownKind(other.to_string())),
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::DecisionTree => "tree",
            ClassifierKind::GaussianNb => "gnb",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    /// Root has depth 0. `usize::MAX` means unbounded.
    pub max_depth: usize,
    /// Nodes with fewer rows become leaves.
    pub min_split: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig { kind: ClassifierKind::DecisionTree, max_depth: 12, min_split: 2 }
    }
}

impl ClassifierConfig {
    pub fn tree() -> Self {
        Self::default()
    }

    pub fn gnb() -> Self {
        ClassifierConfig { kind: ClassifierKind::GaussianNb, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    DecisionTree(DecisionTree),
    GaussianNb(GaussianNb),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub model: Model,
    pub n_classes: usize,
    pub n_features: usize,
}

impl TrainedModel {
    pub fn kind(&self) -> ClassifierKind {
        match self.model {
            Model::DecisionTree(_) => ClassifierKind::DecisionTree,
            Model::GaussianNb(_) => ClassifierKind::GaussianNb,
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        match &self.model {
            Model::DecisionTree(t) => t.predict_row(row),
            Model::GaussianNb(g) => g.predict_row(row),
        }
    }
}

fn check_training(x: &Matrix, y: &[usize], n_classes: usize) -> Result<(), ClassifierError> {
    if y.is_empty() || x.rows() == 0 {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    if x.rows() != y.len() {
        return Err(ClassifierError::LabelCount { rows: x.rows(), labels: y.len() });
    }
    if let Some(&bad) = y.iter().find(|&&l| l >= n_classes) {
        return Err(ClassifierError::LabelOutOfRange { label: bad, n_classes });
    }
    Ok(())
}

pub fn fit_decision_tree(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    config: &ClassifierConfig,
) -> Result<TrainedModel, ClassifierError> {
    check_training(x, y, n_classes)?;
    let tree = DecisionTree::fit(x, y, n_classes, config.max_depth, config.min_split);
    Ok(TrainedModel { model: Model::DecisionTree(tree), n_classes, n_features: x.cols() })
}

pub fn fit_gaussian_nb(x: &Matrix, y: &[usize], n_classes: usize) -> Result<TrainedModel, ClassifierError> {
    check_training(x, y, n_classes)?;
    Ok(TrainedModel { model: Model::GaussianNb(GaussianNb::fit(x, y, n_classes)), n_classes, n_features: x.cols() })
}

/// Fits whichever model `config` names.
pub fn fit(x: &Matrix, y: &[usize], n_classes: usize, config: &ClassifierConfig) -> Result<TrainedModel, ClassifierError> {
    match config.kind {
        ClassifierKind::DecisionTree => fit_decision_tree(x, y, n_classes, config),
        ClassifierKind::GaussianNb => fit_gaussian_nb(x, y, n_classes),
    }
}

pub fn predict(model: &TrainedModel, x: &Matrix) -> Result<Vec<usize>, ClassifierError> {
    if x.cols() != model.n_features {
        return Err(ClassifierError::DimensionMismatch { expected: model.n_features, found: x.cols() });
    }
    Ok((0..x.rows()).map(|r| model.predict_row(x.row(r))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn col(values: &[f64]) -> Matrix {
        Matrix::new(values.len(), 1, values.to_vec())
    }

    #[test]
    fn separable_stump() {
        let x = col(&[0.0, 0.0, 1.0, 1.0]);
        let y = [0, 0, 1, 1];
        let m = fit_decision_tree(&x, &y, 2, &ClassifierConfig::tree()).unwrap();
        let Model::DecisionTree(t) = &m.model else { unreachable!() };
        assert_eq!(t.root_split(), Some((0, 0.5)));
        assert_eq!(t.depth(), 1);
        assert_eq!(predict(&m, &x).unwrap(), y);
    }

    #[test]
    fn single_label_gives_single_leaf() {
        let x = Matrix::from_rows(&[vec![1.0, 5.0], vec![2.0, -1.0], vec![3.0, 0.0]]);
        let m = fit_decision_tree(&x, &[2, 2, 2], 3, &ClassifierConfig::tree()).unwrap();
        let Model::DecisionTree(t) = &m.model else { unreachable!() };
        assert_eq!(t.n_nodes(), 1);
        assert_eq!(m.predict_row(&[100.0, 100.0]), 2);
    }

    #[test]
    fn zero_features_predict_majority() {
        let x = Matrix::new(4, 0, vec![]);
        for cfg in [ClassifierConfig::tree(), ClassifierConfig::gnb()] {
            let m = fit(&x, &[0, 0, 0, 1], 2, &cfg).unwrap();
            assert_eq!(predict(&m, &Matrix::new(3, 0, vec![])).unwrap(), vec![0, 0, 0]);
            // majority tie resolves to lower id
            let m = fit(&x, &[1, 0, 1, 0], 2, &cfg).unwrap();
            assert_eq!(m.predict_row(&[]), 0);
            let m = fit(&x, &[1, 1, 1, 0], 2, &cfg).unwrap();
            assert_eq!(m.predict_row(&[]), 1);
        }
    }

    #[test]
    fn split_ties_prefer_lower_feature_and_threshold() {
        // Both columns separate the classes identically.
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]);
        let y = [0, 1, 0, 1];
        let m = fit_decision_tree(&x, &y, 2, &ClassifierConfig { max_depth: 1, ..ClassifierConfig::tree() }).unwrap();
        let Model::DecisionTree(t) = &m.model else { unreachable!() };
        // Thresholds 0.5 and 2.5 give equal impurity; 0.5 wins.
        assert_eq!(t.root_split(), Some((0, 0.5)));
    }

    #[test]
    fn depth_and_min_split_limits() {
        let x = col(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let y = [0, 1, 0, 1, 0, 1, 0, 1];
        let stump = fit_decision_tree(&x, &y, 2, &ClassifierConfig { max_depth: 0, ..ClassifierConfig::tree() }).unwrap();
        let Model::DecisionTree(t) = &stump.model else { unreachable!() };
        assert_eq!(t.n_nodes(), 1);
        let big = fit_decision_tree(&x, &y, 2, &ClassifierConfig { min_split: 9, ..ClassifierConfig::tree() }).unwrap();
        let Model::DecisionTree(t) = &big.model else { unreachable!() };
        assert_eq!(t.n_nodes(), 1);
        let full = fit_decision_tree(&x, &y, 2, &ClassifierConfig::tree()).unwrap();
        assert_eq!(predict(&full, &x).unwrap(), y);
    }

    #[test]
    fn gnb_midpoint_between_symmetric_classes() {
        // Unit-variance samples around 0 and 10.
        let a = [-1.0, 1.0, -1.0, 1.0];
        let b = [9.0, 11.0, 9.0, 11.0];
        let values: Vec<f64> = a.iter().chain(&b).copied().collect();
        let m = fit_gaussian_nb(&col(&values), &[0, 0, 0, 0, 1, 1, 1, 1], 2).unwrap();
        assert_eq!(m.predict_row(&[4.9]), 0);
        assert_eq!(m.predict_row(&[5.1]), 1);
        assert_eq!(m.predict_row(&[-3.0]), 0);
        assert_eq!(m.predict_row(&[13.0]), 1);
    }

    #[test]
    fn gnb_constant_feature_is_finite() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.1], vec![2.0, 5.0], vec![2.0, 5.1]]);
        let m = fit_gaussian_nb(&x, &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(predict(&m, &x).unwrap(), vec![0, 0, 1, 1]);
        let all_const = Matrix::from_rows(&[vec![3.0], vec![3.0], vec![3.0]]);
        let m = fit_gaussian_nb(&all_const, &[0, 1, 1], 2).unwrap();
        assert_eq!(m.predict_row(&[3.0]), 1);
        assert_eq!(m.predict_row(&[4.0]), 1);
    }

    #[test]
    fn gnb_identical_classes_tie_to_zero() {
        let x = col(&[1.0, 2.0, 1.0, 2.0]);
        let m = fit_gaussian_nb(&x, &[1, 1, 0, 0], 2).unwrap();
        for v in [-5.0, 0.0, 1.5, 9.0] {
            assert_eq!(m.predict_row(&[v]), 0);
        }
    }

    #[test]
    fn predict_edge_cases() {
        let x = col(&[0.0, 1.0]);
        let m = fit_decision_tree(&x, &[0, 1], 2, &ClassifierConfig::tree()).unwrap();
        assert_eq!(predict(&m, &Matrix::new(0, 1, vec![])).unwrap(), Vec::<usize>::new());
        assert_eq!(
            predict(&m, &Matrix::new(1, 2, vec![0.0, 0.0])),
            Err(ClassifierError::DimensionMismatch { expected: 1, found: 2 })
        );
        assert_eq!(
            fit(&Matrix::new(0, 1, vec![]), &[], 2, &ClassifierConfig::tree()),
            Err(ClassifierError::EmptyTrainingSet)
        );
    }

    #[test]
    fn confusion_examples() {
        let perfect = confusion(&[0, 0, 0, 1, 1], &[0, 0, 0, 1, 1], 2).unwrap();
        assert_eq!(perfect.counts(), &[vec![3, 0], vec![0, 2]]);
        let wrong = confusion(&[0; 4], &[1; 4], 2).unwrap();
        assert_eq!(wrong.counts(), &[vec![0, 0], vec![4, 0]]);
        let mixed = confusion(&[0, 1, 0, 1], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(mixed.counts(), &[vec![1, 1], vec![1, 1]]);
        assert!(matches!(confusion(&[0], &[0, 1], 2), Err(ClassifierError::LengthMismatch { .. })));
        assert!(matches!(confusion(&[2], &[0], 2), Err(ClassifierError::LabelOutOfRange { .. })));
    }

    #[test]
    fn macro_f1_examples() {
        assert_eq!(macro_f1(&ConfusionMatrix::from_counts(vec![vec![3, 0], vec![0, 2]])), 1.0);
        assert_eq!(macro_f1(&ConfusionMatrix::from_counts(vec![vec![0, 0], vec![4, 0]])), 0.0);
        assert_eq!(macro_f1(&ConfusionMatrix::from_counts(vec![vec![1, 1], vec![1, 1]])), 0.5);
    }

    #[test]
    fn classifier_names_parse() {
        assert_eq!("tree".parse::<ClassifierKind>().unwrap(), ClassifierKind::DecisionTree);
        assert_eq!("GNB".parse::<ClassifierKind>().unwrap(), ClassifierKind::GaussianNb);
        assert!("svm".parse::<ClassifierKind>().is_err());
    }

    fn labelled_points() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
        (1usize..4, 2usize..40).prop_flat_map(|(m, n)| {
            (
                prop::collection::vec(prop::collection::vec((0i32..6).prop_map(f64::from), m), n),
                prop::collection::vec(0usize..3, n),
            )
        })
    }

    proptest! {
        #[test]
        fn unbounded_tree_fits_consistent_data((rows, labels) in labelled_points()) {
            // Make duplicates agree: label each distinct row by its first occurrence.
            let mut y = labels.clone();
            for i in 0..rows.len() {
                if let Some(j) = (0..i).find(|&j| rows[j] == rows[i]) {
                    y[i] = y[j];
                }
            }
            let x = Matrix::from_rows(&rows);
            let cfg = ClassifierConfig { max_depth: usize::MAX, ..ClassifierConfig::tree() };
            let m = fit_decision_tree(&x, &y, 3, &cfg).unwrap();
            prop_assert_eq!(predict(&m, &x).unwrap(), y);
        }

        #[test]
        fn fit_is_deterministic((rows, labels) in labelled_points(), gnb in any::<bool>()) {
            let x = Matrix::from_rows(&rows);
            let cfg = if gnb { ClassifierConfig::gnb() } else { ClassifierConfig::tree() };
            let a = fit(&x, &labels, 3, &cfg).unwrap();
            let b = fit(&x, &labels, 3, &cfg).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(predict(&a, &x).unwrap(), predict(&b, &x).unwrap());
        }

        #[test]
        fn confusion_columns_and_f1_bounds(
            pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60)
        ) {
            let truth: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let cm = confusion(&truth, &pred, 4).unwrap();
            let mut per_class = vec![0u64; 4];
            for &t in &truth { per_class[t] += 1; }
            prop_assert_eq!(cm.column_sums(), per_class.clone());
            prop_assert_eq!(cm.total(), truth.len() as u64);
            let f1 = macro_f1(&cm);
            prop_assert!((0.0..=1.0).contains(&f1));
            let perfect = cm.is_diagonal() && per_class.iter().all(|&c| c > 0);
            prop_assert_eq!(f1 == 1.0, perfect);
        }
    }
}
