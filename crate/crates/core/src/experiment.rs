//! Single runs and parameter sweeps producing long-format result tables.
//!
//! A sweep is the Cartesian product of feature-prefix lengths, budgets,
//! selectors and seeds. For each seed the data is split once and the features
//! are ranked on that split; a prefix length `m` keeps the first `m` ranked
//! features, in rank order, so `selected_mask` bit `k` refers to the `k`-th
//! ranked feature.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::ClassifierConfig;
use crate::cost_model::{load_costs, CostError, CostVector, LevelMapping};
use crate::data_model::{stratified_split, DataError, Dataset, Split};
use crate::loss_model::{build_default_loss, load_loss, LossError, LossMatrix};
use crate::risk_engine::{Evaluator, RiskError};
use crate::selectors::{
    rank_features, run_selector, CeConfig, RankScheme, SelectError, SelectionResult, SelectorKind, SelectorOptions,
    DEFAULT_M_LIMIT,
};
use crate::synthgen::{generate, SynthError, SynthSpec};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot open {path}")]
    Open { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error("writing results: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Opens `path` for reading; `-` is standard input.
pub fn open_input(path: &Path) -> Result<Box<dyn Read>, ExperimentError> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(io::stdin().lock()));
    }
    File::open(path)
        .map(|f| Box::new(BufReader::new(f)) as Box<dyn Read>)
        .map_err(|source| ExperimentError::Open { path: path.to_path_buf(), source })
}

fn input_error(path: &Path, err: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Input { path: path.to_path_buf(), message: err.to_string() }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files {
        features: PathBuf,
        devices: PathBuf,
        costs: PathBuf,
        /// Absent means the default type/brand loss.
        loss: Option<PathBuf>,
        levels: LevelMapping,
    },
    Synth(SynthSpec),
}

/// Dataset with its costs and loss matrix.
#[derive(Debug, Clone)]
pub struct Problem {
    pub dataset: Dataset,
    pub costs: CostVector,
    pub loss: LossMatrix,
}

pub fn load_problem(source: &DataSource) -> Result<Problem, ExperimentError> {
    match source {
        DataSource::Synth(spec) => {
            let (dataset, costs) = generate(spec)?;
            let loss = build_default_loss(dataset.devices());
            Ok(Problem { dataset, costs, loss })
        }
        DataSource::Files { features, devices, costs, loss, levels } => {
            let stdin_uses = [Some(features), Some(devices), Some(costs), loss.as_ref()]
                .into_iter()
                .flatten()
                .filter(|p| p.as_os_str() == "-")
                .count();
            if stdin_uses > 1 {
                return Err(ExperimentError::Plan("at most one input may be read from stdin".into()));
            }
            let dataset = Dataset::load(open_input(features)?, open_input(devices)?).map_err(|e| match e {
                DataError::Ragged { .. } | DataError::BadNumber { .. } | DataError::UnknownLabel { .. } => {
                    input_error(features, e)
                }
                DataError::BadDevice { .. } => input_error(devices, e),
                other => ExperimentError::Data(other),
            })?;
            let cost_vec = load_costs(open_input(costs)?, dataset.feature_names(), levels)
                .map_err(|e: CostError| input_error(costs, e))?;
            let loss = match loss {
                Some(path) => {
                    load_loss(open_input(path)?, dataset.devices()).map_err(|e: LossError| input_error(path, e))?
                }
                None => build_default_loss(dataset.devices()),
            };
            Ok(Problem { dataset, costs: cost_vec, loss })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub source: DataSource,
    pub classifier: ClassifierConfig,
    pub selectors: Vec<SelectorKind>,
    /// May contain `f64::INFINITY`.
    pub budgets: Vec<f64>,
    /// Empty means all features.
    pub prefix_lengths: Vec<usize>,
    /// The seed field is replaced by each cell's seed.
    pub ce: CeConfig,
    pub seeds: Vec<u64>,
    pub train_fraction: f64,
    pub rank_scheme: RankScheme,
    pub m_limit: usize,
    /// Thread count for the sweep; 0 uses rayon's default.
    pub workers: usize,
}

impl ExperimentPlan {
    pub fn new(source: DataSource) -> Self {
        ExperimentPlan {
            source,
            classifier: ClassifierConfig::default(),
            selectors: vec![SelectorKind::Ce],
            budgets: vec![f64::INFINITY],
            prefix_lengths: Vec::new(),
            ce: CeConfig::default(),
            seeds: vec![0],
            train_fraction: 0.7,
            rank_scheme: RankScheme::SingleRisk,
            m_limit: DEFAULT_M_LIMIT,
            workers: 0,
        }
    }

    pub fn validate(&self, m: usize) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Plan(msg));
        if self.selectors.is_empty() {
            return bad("at least one selector is required".into());
        }
        if self.budgets.is_empty() || self.seeds.is_empty() {
            return bad("budgets and seeds must be nonempty".into());
        }
        if let Some(b) = self.budgets.iter().find(|b| !(**b >= 0.0)) {
            return bad(format!("budget must be nonnegative, got {b}"));
        }
        if let Some(p) = self.prefix_lengths.iter().find(|&&p| p == 0 || p > m) {
            return bad(format!("prefix length {p} outside 1..={m}"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train fraction must be in (0, 1), got {}", self.train_fraction));
        }
        let ce = CeConfig { seed: 0, ..self.ce.clone() };
        ce.validate()?;
        Ok(())
    }
}

/// One line of the long-format results table. Numeric fields are empty for
/// skipped cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: String,
    pub selector: String,
    pub classifier: String,
    pub m: usize,
    pub lambda: f64,
    pub seed: u64,
    pub risk: Option<f64>,
    pub utility: Option<f64>,
    pub total_cost: Option<f64>,
    pub macro_f1: Option<f64>,
    pub n_selected: Option<usize>,
    pub wall_time_ms: Option<f64>,
    pub selected_mask: String,
    /// `ok` or `skipped`.
    pub status: String,
}

fn run_id(selector: SelectorKind, classifier: &ClassifierConfig, m: usize, lambda: f64, seed: u64) -> String {
    format!("{selector}-{}-m{m}-l{lambda}-s{seed}", classifier.kind)
}

impl ResultRow {
    pub fn from_result(
        result: &SelectionResult,
        selector: SelectorKind,
        classifier: &ClassifierConfig,
        lambda: f64,
        seed: u64,
    ) -> Self {
        let m = result.selection.len();
        ResultRow {
            run_id: run_id(selector, classifier, m, lambda, seed),
            selector: selector.to_string(),
            classifier: classifier.kind.to_string(),
            m,
            lambda,
            seed,
            risk: Some(result.report.risk),
            utility: Some(result.report.utility),
            total_cost: Some(result.report.total_cost),
            macro_f1: Some(result.report.macro_f1),
            n_selected: Some(result.selection.count_selected()),
            wall_time_ms: Some(result.wall_time_ms),
            selected_mask: result.selection.to_bitstring(),
            status: "ok".into(),
        }
    }

    fn skipped(selector: SelectorKind, classifier: &ClassifierConfig, m: usize, lambda: f64, seed: u64) -> Self {
        ResultRow {
            run_id: run_id(selector, classifier, m, lambda, seed),
            selector: selector.to_string(),
            classifier: classifier.kind.to_string(),
            m,
            lambda,
            seed,
            risk: None,
            utility: None,
            total_cost: None,
            macro_f1: None,
            n_selected: None,
            wall_time_ms: None,
            selected_mask: String::new(),
            status: "skipped".into(),
        }
    }

    pub fn is_skipped(&self) -> bool {
        self.status == "skipped"
    }
}

pub fn write_results<W: Write>(rows: &[ResultRow], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(src: R) -> Result<Vec<ResultRow>, ExperimentError> {
    csv::Reader::from_reader(src).deserialize().collect::<Result<_, _>>().map_err(Into::into)
}

/// Runs the plan's first selector at its first budget and seed on all features.
pub fn run_single(plan: &ExperimentPlan) -> Result<(SelectionResult, ResultRow), ExperimentError> {
    let problem = load_problem(&plan.source)?;
    run_single_on(&problem, plan)
}

pub fn run_single_on(problem: &Problem, plan: &ExperimentPlan) -> Result<(SelectionResult, ResultRow), ExperimentError> {
    plan.validate(problem.dataset.n_features())?;
    let (selector, budget, seed) = (plan.selectors[0], plan.budgets[0], plan.seeds[0]);
    let split = stratified_split(&problem.dataset, plan.train_fraction, seed)?;
    let ev = Evaluator::new(&problem.dataset, &split, &problem.costs, &problem.loss, &plan.classifier)?;
    let options = SelectorOptions { ce: CeConfig { seed, ..plan.ce.clone() }, m_limit: plan.m_limit };
    let result = run_selector(selector, &ev, budget, &options)?;
    let row = ResultRow::from_result(&result, selector, &plan.classifier, budget, seed);
    Ok((result, row))
}

/// Feature order used for prefix sweeps on one seed's split.
pub fn ranking(problem: &Problem, plan: &ExperimentPlan, split: &Split) -> Result<Vec<usize>, ExperimentError> {
    let ev = Evaluator::new(&problem.dataset, split, &problem.costs, &problem.loss, &plan.classifier)?;
    Ok(rank_features(&ev, &plan.rank_scheme)?)
}

struct PrefixInstance {
    m: usize,
    seed: u64,
    dataset: Dataset,
    costs: CostVector,
    split: Split,
}

pub fn run_sweep(plan: &ExperimentPlan) -> Result<Vec<ResultRow>, ExperimentError> {
    let problem = load_problem(&plan.source)?;
    run_sweep_on(&problem, plan)
}

pub fn run_sweep_on(problem: &Problem, plan: &ExperimentPlan) -> Result<Vec<ResultRow>, ExperimentError> {
    let m_total = problem.dataset.n_features();
    plan.validate(m_total)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    pool.install(|| sweep_in_pool(problem, plan, m_total))
}

fn sweep_in_pool(problem: &Problem, plan: &ExperimentPlan, m_total: usize) -> Result<Vec<ResultRow>, ExperimentError> {
    let prefixes = if plan.prefix_lengths.is_empty() { vec![m_total] } else { plan.prefix_lengths.clone() };
    let mut instances = Vec::new();
    for &seed in &plan.seeds {
        let split = stratified_split(&problem.dataset, plan.train_fraction, seed)?;
        let order = if plan.prefix_lengths.is_empty() {
            (0..m_total).collect()
        } else {
            ranking(problem, plan, &split)?
        };
        for &m in &prefixes {
            let columns = &order[..m];
            instances.push(PrefixInstance {
                m,
                seed,
                dataset: problem.dataset.restrict_features(columns),
                costs: problem.costs.restrict(columns),
                split: split.clone(),
            });
        }
    }

    let mut cells = Vec::new();
    for inst in &instances {
        for &budget in &plan.budgets {
            for &selector in &plan.selectors {
                cells.push((inst, budget, selector));
            }
        }
    }
    let mut rows = cells
        .into_par_iter()
        .map(|(inst, budget, selector)| {
            if selector == SelectorKind::Brute && inst.m > plan.m_limit {
                return Ok(ResultRow::skipped(selector, &plan.classifier, inst.m, budget, inst.seed));
            }
            let ev = Evaluator::new(&inst.dataset, &inst.split, &inst.costs, &problem.loss, &plan.classifier)?;
            let options =
                SelectorOptions { ce: CeConfig { seed: inst.seed, ..plan.ce.clone() }, m_limit: plan.m_limit };
            let result = run_selector(selector, &ev, budget, &options)?;
            Ok(ResultRow::from_result(&result, selector, &plan.classifier, budget, inst.seed))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    rows.sort_by(|a, b| {
        a.m.cmp(&b.m)
            .then(a.lambda.total_cmp(&b.lambda))
            .then(a.selector.cmp(&b.selector))
            .then(a.seed.cmp(&b.seed))
    });
    Ok(rows)
}

/// Mean over seeds of `R_CE - R_VGA` for one `(m, lambda)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub m: usize,
    pub lambda: f64,
    pub n_seeds: usize,
    pub mean_ce_risk: f64,
    pub mean_vga_risk: f64,
    pub risk_difference: f64,
}

/// Pairs CE and VGA rows by `(m, lambda, seed)`. Cells lacking either are omitted.
pub fn ce_vga_surface(rows: &[ResultRow]) -> Vec<SurfacePoint> {
    let key = |r: &ResultRow| (r.m, r.lambda.to_bits(), r.seed);
    let mut ce = BTreeMap::new();
    let mut vga = BTreeMap::new();
    for r in rows.iter().filter(|r| !r.is_skipped()) {
        match r.selector.as_str() {
            "ce" => ce.insert(key(r), r.risk.unwrap_or(f64::NAN)),
            "vga" => vga.insert(key(r), r.risk.unwrap_or(f64::NAN)),
            _ => None,
        };
    }
    let mut cells: BTreeMap<(usize, u64), (f64, Vec<(f64, f64)>)> = BTreeMap::new();
    for (&(m, lambda_bits, seed), &r_ce) in &ce {
        if let Some(&r_vga) = vga.get(&(m, lambda_bits, seed)) {
            cells.entry((m, lambda_bits)).or_insert_with(|| (f64::from_bits(lambda_bits), Vec::new())).1.push((r_ce, r_vga));
        }
    }
    let mut points: Vec<SurfacePoint> = cells
        .into_iter()
        .map(|((m, _), (lambda, pairs))| {
            let n = pairs.len() as f64;
            let mean_ce = pairs.iter().map(|p| p.0).sum::<f64>() / n;
            let mean_vga = pairs.iter().map(|p| p.1).sum::<f64>() / n;
            SurfacePoint {
                m,
                lambda,
                n_seeds: pairs.len(),
                mean_ce_risk: mean_ce,
                mean_vga_risk: mean_vga,
                risk_difference: pairs.iter().map(|p| p.0 - p.1).sum::<f64>() / n,
            }
        })
        .collect();
    points.sort_by(|a, b| a.m.cmp(&b.m).then(a.lambda.total_cmp(&b.lambda)));
    points
}

pub fn write_surface<W: Write>(points: &[SurfacePoint], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
