//! Cross-entropy search over independent Bernoulli selection masks.
//!
//! Each iteration draws `eta` masks from the current per-feature inclusion
//! probabilities, discards those over budget, scores the rest by utility
//! `1 / risk`, and moves the probabilities toward the bit frequencies of the
//! elite samples (utility at or above the `rho` order statistic) with
//! smoothing `alpha`. The final mask thresholds the probabilities at `beta`
//! and falls back to the best feasible sample seen when that mask is over
//! budget or worse.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_budget, compare_candidates, SelectError, SelectionResult};
use crate::cost_model::selection_cost;
use crate::data_model::SelectionVector;
use crate::risk_engine::{utility, Evaluator};

/// Consecutive iterations without a feasible sample before giving up.
pub const MAX_EMPTY_ITERATIONS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeConfig {
    /// Samples drawn per iteration.
    pub eta: usize,
    pub t_max: usize,
    /// Elite quantile; the top `1 - rho` fraction of feasible samples is elite.
    pub rho: f64,
    /// Weight of the new elite frequencies in the smoothed update.
    pub alpha: f64,
    /// Final inclusion threshold.
    pub beta: f64,
    pub seed: u64,
    /// Stop once every probability is within this distance of 0 or 1.
    pub epsilon_converge: f64,
}

impl Default for CeConfig {
    fn default() -> Self {
        CeConfig { eta: 1000, t_max: 500, rho: 0.9, alpha: 0.7, beta: 0.5, seed: 0, epsilon_converge: 1e-3 }
    }
}

impl CeConfig {
    pub fn validate(&self) -> Result<(), SelectError> {
        let bad = |msg: String| Err(SelectError::BadConfig(msg));
        if self.eta < 10 {
            return bad(format!("eta must be at least 10, got {}", self.eta));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho must be in (0, 1), got {}", self.rho));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must be in [0, 1], got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad(format!("beta must be in (0, 1), got {}", self.beta));
        }
        if !(self.epsilon_converge >= 0.0) {
            return bad(format!("epsilon_converge must be nonnegative, got {}", self.epsilon_converge));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeIteration {
    pub iteration: usize,
    /// Elite threshold on utility; absent when no sample was feasible.
    pub gamma: Option<f64>,
    /// Mean utility over feasible samples.
    pub mean_utility: Option<f64>,
    /// Inclusion probabilities after this iteration's update.
    pub probabilities: Vec<f64>,
    pub n_feasible: usize,
    pub n_elite: usize,
    /// Masks scored for the first time in this iteration.
    pub n_new_evaluations: usize,
    pub incumbent: Option<SelectionVector>,
    pub incumbent_risk: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIterations,
    Converged,
    NoFeasibleSamples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeTrace {
    pub rho: f64,
    pub iterations: Vec<CeIteration>,
    /// Mask obtained by thresholding the final probabilities at `beta`.
    pub thresholded: SelectionVector,
    pub stop_reason: StopReason,
    pub used_incumbent: bool,
}

impl CeTrace {
    /// One JSON object per iteration.
    pub fn write_json_lines<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for it in &self.iterations {
            serde_json::to_writer(&mut out, it)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// 1-based rank of the elite threshold in the ascending sort of `n` utilities.
pub(crate) fn elite_rank(rho: f64, n: usize) -> usize {
    ((rho * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

struct Incumbent {
    selection: SelectionVector,
    risk: f64,
    cost: f64,
}

pub fn select_cross_entropy(evaluator: &Evaluator<'_>, budget: f64, config: &CeConfig) -> Result<SelectionResult, SelectError> {
    check_budget(budget)?;
    config.validate()?;
    let start = Instant::now();
    let m = evaluator.n_features();
    let costs = evaluator.costs;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut p = vec![0.5; m];
    let mut memo: HashMap<SelectionVector, f64> = HashMap::new();
    let mut incumbent: Option<Incumbent> = None;
    let mut iterations = Vec::new();
    let mut empty_streak = 0;
    let mut stop_reason = StopReason::MaxIterations;

    for t in 0..config.t_max {
        let samples: Vec<SelectionVector> = (0..config.eta)
            .map(|_| SelectionVector::from_mask(p.iter().map(|&pk| rng.random::<f64>() < pk).collect()))
            .collect();
        let feasible: Vec<(&SelectionVector, f64)> = samples
            .iter()
            .map(|s| (s, selection_cost(costs, s)))
            .filter(|&(_, c)| c <= budget)
            .collect();

        if feasible.is_empty() {
            p.iter_mut().for_each(|pk| *pk *= 0.5);
            empty_streak += 1;
            iterations.push(CeIteration {
                iteration: t,
                gamma: None,
                mean_utility: None,
                probabilities: p.clone(),
                n_feasible: 0,
                n_elite: 0,
                n_new_evaluations: 0,
                incumbent: incumbent.as_ref().map(|i| i.selection.clone()),
                incumbent_risk: incumbent.as_ref().map(|i| i.risk),
            });
            if empty_streak >= MAX_EMPTY_ITERATIONS {
                stop_reason = StopReason::NoFeasibleSamples;
                break;
            }
            continue;
        }
        empty_streak = 0;

        // Score unseen masks in parallel; order of first appearance keeps this deterministic.
        let mut seen = HashSet::new();
        let fresh: Vec<&SelectionVector> = feasible
            .iter()
            .map(|&(s, _)| s)
            .filter(|s| !memo.contains_key(*s) && seen.insert(*s))
            .collect();
        let scored = fresh
            .par_iter()
            .map(|s| evaluator.evaluate(s).map(|r| r.risk))
            .collect::<Result<Vec<_>, _>>()?;
        let n_new = fresh.len();
        for (s, risk) in fresh.into_iter().zip(scored) {
            memo.insert(s.clone(), risk);
        }

        let risks: Vec<f64> = feasible.iter().map(|(s, _)| memo[*s]).collect();
        for (&(s, cost), &risk) in feasible.iter().zip(&risks) {
            let improves = incumbent.as_ref().is_none_or(|inc| {
                compare_candidates((risk, cost, s), (inc.risk, inc.cost, &inc.selection)).is_lt()
            });
            if improves {
                incumbent = Some(Incumbent { selection: s.clone(), risk, cost });
            }
        }

        let utilities: Vec<f64> = risks.iter().map(|&r| utility(r)).collect();
        let mut sorted = utilities.clone();
        sorted.sort_by(f64::total_cmp);
        let gamma = sorted[elite_rank(config.rho, sorted.len()) - 1];

        let mut elite_counts = vec![0usize; m];
        let mut n_elite = 0;
        for (&(s, _), &u) in feasible.iter().zip(&utilities) {
            if u >= gamma {
                n_elite += 1;
                for k in s.selected_indices() {
                    elite_counts[k] += 1;
                }
            }
        }
        for (pk, &count) in p.iter_mut().zip(&elite_counts) {
            *pk = config.alpha * (count as f64 / n_elite as f64) + (1.0 - config.alpha) * *pk;
        }

        let inc = incumbent.as_ref().expect("feasible samples set an incumbent");
        iterations.push(CeIteration {
            iteration: t,
            gamma: Some(gamma),
            mean_utility: Some(utilities.iter().sum::<f64>() / utilities.len() as f64),
            probabilities: p.clone(),
            n_feasible: feasible.len(),
            n_elite,
            n_new_evaluations: n_new,
            incumbent: Some(inc.selection.clone()),
            incumbent_risk: Some(inc.risk),
        });

        let spread = p.iter().map(|pk| (pk - pk.round()).abs()).fold(0.0, f64::max);
        if spread < config.epsilon_converge {
            stop_reason = StopReason::Converged;
            break;
        }
    }

    let thresholded = SelectionVector::from_mask(p.iter().map(|&pk| pk >= config.beta).collect());
    let candidate = if stop_reason == StopReason::NoFeasibleSamples {
        SelectionVector::empty(m)
    } else {
        thresholded.clone()
    };
    let candidate_cost = selection_cost(costs, &candidate);
    let candidate_report = if candidate_cost <= budget {
        Some(evaluator.evaluate(&candidate)?)
    } else {
        None
    };
    let (report, used_incumbent) = match (candidate_report, incumbent) {
        (Some(rep), Some(inc)) if rep.risk > inc.risk => (evaluator.evaluate(&inc.selection)?, true),
        (Some(rep), _) => (rep, false),
        (None, Some(inc)) => (evaluator.evaluate(&inc.selection)?, true),
        (None, None) => (evaluator.evaluate(&SelectionVector::empty(m))?, false),
    };

    Ok(SelectionResult {
        selection: report.selection.clone(),
        report,
        selector_name: "ce".into(),
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        trace: Some(CeTrace { rho: config.rho, iterations, thresholded, stop_reason, used_incumbent }),
    })
}
