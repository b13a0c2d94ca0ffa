//! Budget-constrained feature selection for IoT device classifiers.
//!
//! A selection of traffic features is scored by the expected misclassification
//! loss ("risk") of a classifier trained on those features. The crate provides
//! four ways to choose a selection under a feature-extraction budget: a
//! cross-entropy stochastic search, exhaustive enumeration, and three greedy
//! heuristics. The [`experiment`] module runs them over parameter grids.

pub mod classifiers;
pub mod cost_model;
pub mod data_model;
pub mod experiment;
pub mod loss_model;
pub mod risk_engine;
pub mod selectors;
pub mod synthgen;

pub use classifiers::{ClassifierConfig, ClassifierKind, ConfusionMatrix, TrainedModel};
pub use cost_model::{is_feasible, selection_cost, CostVector, LevelMapping};
pub use data_model::{project, stratified_split, Dataset, DeviceLabel, Matrix, SelectionVector, Split};
pub use loss_model::{build_default_loss, load_loss, LossMatrix};
pub use risk_engine::{evaluate_selection, misclass_probs, risk_score, Evaluator, MisclassMatrix, RiskReport};
pub use selectors::{
    rank_features, run_selector, CeConfig, CeTrace, RankScheme, SelectError, SelectionResult, SelectorKind,
    SelectorOptions,
};
pub use synthgen::{generate, SynthSpec};
