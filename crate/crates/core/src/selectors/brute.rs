//! Exhaustive search over all `2^m` masks.

use std::time::Instant;

use rayon::prelude::*;

use super::{check_budget, compare_candidates, SelectError, SelectionResult};
use crate::cost_model::is_feasible;
use crate::data_model::SelectionVector;
use crate::risk_engine::{Evaluator, RiskReport};

/// Largest `m` enumerated by default.
pub const DEFAULT_M_LIMIT: usize = 25;

/// Evaluates every feasible mask (including the empty one) and keeps the
/// best under (risk, cost, mask) order.
pub fn select_brute_force(evaluator: &Evaluator<'_>, budget: f64, m_limit: usize) -> Result<SelectionResult, SelectError> {
    check_budget(budget)?;
    let m = evaluator.n_features();
    if m > m_limit || m >= 64 {
        return Err(SelectError::TooManyFeatures { m, limit: m_limit.min(63) });
    }
    let start = Instant::now();
    let better = |a: RiskReport, b: RiskReport| {
        if compare_candidates((b.risk, b.total_cost, &b.selection), (a.risk, a.total_cost, &a.selection)).is_lt() {
            b
        } else {
            a
        }
    };
    let best = (0..1u64 << m)
        .into_par_iter()
        .map(|bits| SelectionVector::from_bits(bits, m))
        .filter(|v| is_feasible(evaluator.costs, v, budget))
        .map(|v| evaluator.evaluate(&v))
        .try_reduce_with(|a, b| Ok(better(a, b)))
        .expect("the empty mask is always feasible")?;
    Ok(SelectionResult {
        selection: best.selection.clone(),
        report: best,
        selector_name: "brute".into(),
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        trace: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selectors::test_support::fixture;

    #[test]
    fn picks_only_affordable_perfect_feature() {
        let fx = fixture(&[true, true], &[1.0, 3.0], 2);
        let r = select_brute_force(&fx.evaluator(), 1.0, DEFAULT_M_LIMIT).unwrap();
        assert_eq!(r.selection.to_bitstring(), "10");
        assert_eq!(r.report.risk, 0.0);
    }

    #[test]
    fn matches_naive_enumeration() {
        let fx = fixture(&[true, false, false], &[2.0, 1.0, 1.0], 3);
        let ev = fx.evaluator();
        let r = select_brute_force(&ev, 10.0, DEFAULT_M_LIMIT).unwrap();
        // Second, sequential enumeration.
        let mut best = f64::INFINITY;
        for bits in 0..8u64 {
            let rep = ev.evaluate(&SelectionVector::from_bits(bits, 3)).unwrap();
            best = best.min(rep.risk);
        }
        assert_eq!(r.report.risk, best);
        // Cheapest optimum among ties is the informative feature alone.
        assert_eq!(r.selection.to_bitstring(), "100");
    }

    #[test]
    fn zero_budget_returns_empty() {
        let fx = fixture(&[true, true], &[1.0, 1.0], 2);
        let ev = fx.evaluator();
        let r = select_brute_force(&ev, 0.0, DEFAULT_M_LIMIT).unwrap();
        assert_eq!(r.selection, SelectionVector::empty(2));
        assert_eq!(r.report.risk, ev.evaluate(&SelectionVector::empty(2)).unwrap().risk);
    }

    #[test]
    fn limit_enforced() {
        let fx = fixture(&[true, true, true], &[1.0, 1.0, 1.0], 2);
        assert!(matches!(
            select_brute_force(&fx.evaluator(), 5.0, 2),
            Err(SelectError::TooManyFeatures { m: 3, limit: 2 })
        ));
        assert!(matches!(select_brute_force(&fx.evaluator(), -1.0, 25), Err(SelectError::BadBudget(_))));
    }
}
