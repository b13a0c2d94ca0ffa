//! Budget-constrained feature selection strategies.
//!
//! Every selector returns a selection whose total cost is within the budget
//! (inclusive). Selectors are driven through an [`Evaluator`], which fixes
//! the dataset, split, costs, loss matrix and classifier.

mod brute;
mod ce;
mod greedy;

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use brute::{select_brute_force, DEFAULT_M_LIMIT};
pub use ce::{select_cross_entropy, CeConfig, CeIteration, CeTrace, StopReason};
pub use greedy::{greedy_keys, select_greedy, GreedyKey};

use crate::data_model::SelectionVector;
use crate::risk_engine::{Evaluator, RiskError, RiskReport};

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("brute force over {m} features exceeds the limit of {limit}")]
    TooManyFeatures { m: usize, limit: usize },
    #[error("budget must be a nonnegative number, got {0}")]
    BadBudget(f64),
    #[error("invalid cross-entropy configuration: {0}")]
    BadConfig(String),
    #[error("feature ordering: {0}")]
    Ordering(String),
    #[error("unknown selector `{0}` (expected ce, brute, cga, rga or vga)")]
    UnknownSelector(String),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorKind {
    Ce,
    Brute,
    Cga,
    Rga,
    Vga,
}

impl SelectorKind {
    pub const ALL: [SelectorKind; 5] =
        [SelectorKind::Ce, SelectorKind::Brute, SelectorKind::Cga, SelectorKind::Rga, SelectorKind::Vga];

    pub fn as_str(&self) -> &'static str {
        match self {
            SelectorKind::Ce => "ce",
            SelectorKind::Brute => "brute",
            SelectorKind::Cga => "cga",
            SelectorKind::Rga => "rga",
            SelectorKind::Vga => "vga",
        }
    }
}

impl FromStr for SelectorKind {
    type Err = SelectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ce" => Ok(SelectorKind::Ce),
            "brute" => Ok(SelectorKind::Brute),
            "cga" => Ok(SelectorKind::Cga),
            "rga" => Ok(SelectorKind::Rga),
            "vga" => Ok(SelectorKind::Vga),
            other => Err(SelectError::UnknownSelector(other.to_string())),
        }
    }
}

impl fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub selection: SelectionVector,
    pub report: RiskReport,
    pub selector_name: String,
    pub wall_time_ms: f64,
    pub trace: Option<CeTrace>,
}

/// Options shared by [`run_selector`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorOptions {
    pub ce: CeConfig,
    pub m_limit: usize,
}

impl Default for SelectorOptions {
    fn default() -> Self {
        SelectorOptions { ce: CeConfig::default(), m_limit: DEFAULT_M_LIMIT }
    }
}

pub fn run_selector(
    kind: SelectorKind,
    evaluator: &Evaluator<'_>,
    budget: f64,
    options: &SelectorOptions,
) -> Result<SelectionResult, SelectError> {
    match kind {
        SelectorKind::Ce => select_cross_entropy(evaluator, budget, &options.ce),
        SelectorKind::Brute => select_brute_force(evaluator, budget, options.m_limit),
        SelectorKind::Cga => select_greedy(evaluator, budget, GreedyKey::Cost),
        SelectorKind::Rga => select_greedy(evaluator, budget, GreedyKey::Risk),
        SelectorKind::Vga => select_greedy(evaluator, budget, GreedyKey::Value),
    }
}

pub(crate) fn check_budget(budget: f64) -> Result<(), SelectError> {
    if budget >= 0.0 {
        Ok(())
    } else {
        Err(SelectError::BadBudget(budget))
    }
}

/// Order used to pick among feasible selections: lower risk, then lower
/// cost, then the lexicographically smaller mask.
pub(crate) fn compare_candidates(a: (f64, f64, &SelectionVector), b: (f64, f64, &SelectionVector)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then_with(|| a.2.cmp(b.2))
}

/// Reports for each single-feature selection, in feature order.
pub fn single_feature_reports(evaluator: &Evaluator<'_>) -> Result<Vec<RiskReport>, SelectError> {
    let m = evaluator.n_features();
    (0..m)
        .into_par_iter()
        .map(|k| evaluator.evaluate(&SelectionVector::from_indices(m, &[k])))
        .collect::<Result<Vec<_>, _>>()
        .map_err(SelectError::from)
}

/// How to order features for prefix sweeps.
#[derive(Debug, Clone, PartialEq)]
pub enum RankScheme {
    /// Ascending single-feature risk, ties by index.
    SingleRisk,
    /// Explicit list of feature names.
    File(Vec<String>),
}

/// Reads one feature name per line; blank lines are ignored.
pub fn read_ordering<R: BufRead>(src: R) -> Result<Vec<String>, SelectError> {
    let mut names = Vec::new();
    for line in src.lines() {
        let line = line?;
        let name = line.trim();
        if !name.is_empty() {
            names.push(name.to_string());
        }
    }
    Ok(names)
}

/// Permutation of feature indices, most preferred first.
pub fn rank_features(evaluator: &Evaluator<'_>, scheme: &RankScheme) -> Result<Vec<usize>, SelectError> {
    match scheme {
        RankScheme::SingleRisk => {
            let risks: Vec<f64> = single_feature_reports(evaluator)?.iter().map(|r| r.risk).collect();
            let mut order: Vec<usize> = (0..risks.len()).collect();
            order.sort_by(|&a, &b| risks[a].total_cmp(&risks[b]).then(a.cmp(&b)));
            Ok(order)
        }
        RankScheme::File(names) => ordering_from_names(evaluator.dataset.feature_names(), names),
    }
}

pub fn ordering_from_names(feature_names: &[String], names: &[String]) -> Result<Vec<usize>, SelectError> {
    let index: HashMap<&str, usize> = feature_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut seen = vec![false; feature_names.len()];
    let mut order = Vec::with_capacity(names.len());
    for name in names {
        let &k = index
            .get(name.as_str())
            .ok_or_else(|| SelectError::Ordering(format!("unknown feature `{name}`")))?;
        if seen[k] {
            return Err(SelectError::Ordering(format!("feature `{name}` listed twice")));
        }
        seen[k] = true;
        order.push(k);
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(SelectError::Ordering(format!("feature `{}` missing", feature_names[k])));
    }
    Ok(order)
}

#[cfg(test)]
pub(crate) mod test_support {
    use crate::classifiers::ClassifierConfig;
    use crate::cost_model::CostVector;
    use crate::data_model::{stratified_split, Dataset, DeviceLabel, Matrix, Split};
    use crate::loss_model::{build_default_loss, LossMatrix};

    /// Two or more classes; `informative[k]` makes feature `k` encode the class
    /// exactly, otherwise the column is a class-independent ramp.
    pub struct Fixture {
        pub dataset: Dataset,
        pub split: Split,
        pub costs: CostVector,
        pub loss: LossMatrix,
        pub classifier: ClassifierConfig,
    }

    pub fn fixture(informative: &[bool], costs: &[f64], n_classes: usize) -> Fixture {
        let per_class = 10;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..n_classes {
            for i in 0..per_class {
                rows.push(
                    informative
                        .iter()
                        .enumerate()
                        .map(|(k, &inf)| if inf { (c * 10) as f64 + i as f64 * 0.1 } else { ((i * 7 + k * 3) % 10) as f64 })
                        .collect(),
                );
                labels.push(c);
            }
        }
        let devices: Vec<DeviceLabel> = (0..n_classes)
            .map(|id| DeviceLabel {
                id,
                type_name: ["camera", "plug"][id % 2].into(),
                brand: ["acme", "globex"][(id / 2) % 2].into(),
                display_name: format!("d{id}"),
            })
            .collect();
        let names = (0..informative.len()).map(|k| format!("f{k}")).collect();
        let dataset = Dataset::new(Matrix::from_rows(&rows), labels, names, devices).unwrap();
        let split = stratified_split(&dataset, 0.7, 3).unwrap();
        let loss = build_default_loss(dataset.devices());
        Fixture {
            dataset,
            split,
            costs: CostVector::new(costs.to_vec()).unwrap(),
            loss,
            classifier: ClassifierConfig::tree(),
        }
    }

    impl Fixture {
        pub fn evaluator(&self) -> crate::risk_engine::Evaluator<'_> {
            crate::risk_engine::Evaluator::new(&self.dataset, &self.split, &self.costs, &self.loss, &self.classifier)
                .unwrap()
        }
    }
}
