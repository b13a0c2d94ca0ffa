//! Single-pass greedy selection under a budget.
//!
//! Features are visited in key order; each is added and then dropped again if
//! the running total breaks the budget. The scan continues past rejected
//! features, so a cheaper feature later in the order can still fit.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{check_budget, single_feature_reports, SelectError, SelectionResult};
use crate::cost_model::is_feasible;
use crate::data_model::SelectionVector;
use crate::risk_engine::Evaluator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GreedyKey {
    /// Ascending cost.
    Cost,
    /// Ascending single-feature risk.
    Risk,
    /// Descending single-feature macro F1 divided by cost.
    Value,
}

impl GreedyKey {
    pub fn selector_name(&self) -> &'static str {
        match self {
            GreedyKey::Cost => "cga",
            GreedyKey::Risk => "rga",
            GreedyKey::Value => "vga",
        }
    }

    fn descending(&self) -> bool {
        matches!(self, GreedyKey::Value)
    }
}

/// Per-feature sort keys.
pub fn greedy_keys(evaluator: &Evaluator<'_>, key: GreedyKey) -> Result<Vec<f64>, SelectError> {
    let costs = evaluator.costs.as_slice();
    Ok(match key {
        GreedyKey::Cost => costs.to_vec(),
        GreedyKey::Risk => single_feature_reports(evaluator)?.iter().map(|r| r.risk).collect(),
        GreedyKey::Value => single_feature_reports(evaluator)?
            .iter()
            .zip(costs)
            .map(|(r, c)| r.macro_f1 / c)
            .collect(),
    })
}

pub(crate) fn visit_order(keys: &[f64], descending: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| {
        let by_key = keys[a].total_cmp(&keys[b]);
        let by_key = if descending { by_key.reverse() } else { by_key };
        by_key.then(a.cmp(&b))
    });
    order
}

pub fn select_greedy(evaluator: &Evaluator<'_>, budget: f64, key: GreedyKey) -> Result<SelectionResult, SelectError> {
    check_budget(budget)?;
    let start = Instant::now();
    let m = evaluator.n_features();
    let keys = greedy_keys(evaluator, key)?;
    let mut selection = SelectionVector::empty(m);
    for k in visit_order(&keys, key.descending()) {
        selection.set(k, true);
        if !is_feasible(evaluator.costs, &selection, budget) {
            selection.set(k, false);
        }
    }
    let report = evaluator.evaluate(&selection)?;
    Ok(SelectionResult {
        selection,
        report,
        selector_name: key.selector_name().into(),
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        trace: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selectors::test_support::fixture;

    #[test]
    fn cost_key_hand_trace() {
        // Visit order (1, 2, 0): add f1 (1), add f2 (3), reject f0 (6 > 3).
        let fx = fixture(&[true, false, true], &[3.0, 1.0, 2.0], 2);
        let ev = fx.evaluator();
        assert_eq!(visit_order(&greedy_keys(&ev, GreedyKey::Cost).unwrap(), false), vec![1, 2, 0]);
        let r = select_greedy(&ev, 3.0, GreedyKey::Cost).unwrap();
        assert_eq!(r.selection, SelectionVector::from_indices(3, &[1, 2]));
        assert_eq!(r.report.total_cost, 3.0);
    }

    #[test]
    fn scan_continues_after_rejection() {
        // Order by cost: f1 (1), f0 (5), f2 (5); budget 6 takes f1 and f0, rejects f2.
        let fx = fixture(&[true, true, true], &[5.0, 1.0, 5.0], 2);
        let r = select_greedy(&fx.evaluator(), 6.0, GreedyKey::Cost).unwrap();
        assert_eq!(r.selection.to_bitstring(), "110");
        // With value key the first visited feature may be rejected while a later one fits.
        let fx = fixture(&[true, false], &[1.5, 1.0], 2);
        let ev = fx.evaluator();
        assert_eq!(visit_order(&greedy_keys(&ev, GreedyKey::Value).unwrap(), true)[0], 0);
        let r = select_greedy(&ev, 1.0, GreedyKey::Value).unwrap();
        assert_eq!(r.selection.to_bitstring(), "01");
    }

    #[test]
    fn unconstrained_selects_everything() {
        let fx = fixture(&[true, false, true, false], &[3.0, 1.0, 2.0, 2.0], 3);
        let ev = fx.evaluator();
        let total = fx.costs.total();
        let results: Vec<_> = [GreedyKey::Cost, GreedyKey::Risk, GreedyKey::Value]
            .into_iter()
            .map(|k| select_greedy(&ev, total, k).unwrap())
            .collect();
        for r in &results {
            assert_eq!(r.selection, SelectionVector::full(4));
            assert_eq!(r.report.risk, results[0].report.risk);
        }
    }

    #[test]
    fn zero_budget_selects_nothing() {
        let fx = fixture(&[true, true], &[1.0, 2.0], 2);
        for k in [GreedyKey::Cost, GreedyKey::Risk, GreedyKey::Value] {
            assert_eq!(select_greedy(&fx.evaluator(), 0.0, k).unwrap().selection, SelectionVector::empty(2));
        }
    }

    #[test]
    fn value_key_is_f1_over_cost() {
        let fx = fixture(&[true, false], &[2.0, 1.0], 2);
        let ev = fx.evaluator();
        let keys = greedy_keys(&ev, GreedyKey::Value).unwrap();
        let f1 = single_feature_reports(&ev).unwrap();
        assert_eq!(keys, vec![f1[0].macro_f1 / 2.0, f1[1].macro_f1 / 1.0]);
        assert_eq!(keys[0], 0.5);
    }

    #[test]
    fn ties_visit_lower_index_first() {
        assert_eq!(visit_order(&[2.0, 1.0, 2.0, 1.0], false), vec![1, 3, 0, 2]);
        assert_eq!(visit_order(&[2.0, 1.0, 2.0, 1.0], true), vec![0, 2, 1, 3]);
    }
}
