//! Per-feature extraction costs and budget feasibility.
//!
//! A feature's cost is either given directly or aggregated from three
//! categorical components (memory, compute, privacy) by taking their median.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::SelectionVector;

#[derive(Debug, Error)]
pub enum CostError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("costs: unrecognized header; expected `feature,memory,compute,privacy` or `feature,cost`")]
    Header,
    #[error("costs: row {row}: unknown feature `{name}`")]
    UnknownFeature { row: usize, name: String },
    #[error("costs: row {row}: feature `{name}` listed more than once")]
    Duplicate { row: usize, name: String },
    #[error("costs: no cost given for feature `{0}`")]
    MissingFeature(String),
    #[error("costs: row {row}: unrecognized cost level `{word}`")]
    BadLevel { row: usize, word: String },
    #[error("costs: row {row}: cost `{value}` is not a positive number")]
    BadCost { row: usize, value: String },
    #[error("costs: row {row}: expected {expected} columns, found {found}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("level mapping must be strictly increasing and positive (got {0}, {1}, {2})")]
    BadMapping(f64, f64, f64),
    #[error("cost vector has {costs} entries for {features} features")]
    Length { costs: usize, features: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostLevel {
    Low,
    Medium,
    High,
}

impl FromStr for CostLevel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" => Ok(CostLevel::Low),
            "medium" => Ok(CostLevel::Medium),
            "high" => Ok(CostLevel::High),
            _ => Err(()),
        }
    }
}

impl fmt::Display for CostLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostLevel::Low => "low",
            CostLevel::Medium => "medium",
            CostLevel::High => "high",
        })
    }
}

/// Numeric value assigned to each level. Defaults to 1/2/3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelMapping {
    pub low: f64,
    pub medium: f64,
    pub high: f64,
}

impl Default for LevelMapping {
    fn default() -> Self {
        LevelMapping { low: 1.0, medium: 2.0, high: 3.0 }
    }
}

impl LevelMapping {
    pub fn new(low: f64, medium: f64, high: f64) -> Result<Self, CostError> {
        if !(low > 0.0 && low < medium && medium < high && high.is_finite()) {
            return Err(CostError::BadMapping(low, medium, high));
        }
        Ok(LevelMapping { low, medium, high })
    }

    pub fn value(&self, level: CostLevel) -> f64 {
        match level {
            CostLevel::Low => self.low,
            CostLevel::Medium => self.medium,
            CostLevel::High => self.high,
        }
    }
}

/// Middle order statistic of three values.
pub fn median3(a: f64, b: f64, c: f64) -> f64 {
    a.max(b).min(a.min(b).max(c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCost {
    pub feature_name: String,
    pub memory: CostLevel,
    pub compute: CostLevel,
    pub privacy: CostLevel,
    pub total: f64,
}

impl FeatureCost {
    pub fn new(
        feature_name: impl Into<String>,
        memory: CostLevel,
        compute: CostLevel,
        privacy: CostLevel,
        mapping: &LevelMapping,
    ) -> Self {
        let total = median3(mapping.value(memory), mapping.value(compute), mapping.value(privacy));
        FeatureCost { feature_name: feature_name.into(), memory, compute, privacy, total }
    }
}

/// Extraction cost of every feature, aligned with the dataset's column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostVector {
    costs: Vec<f64>,
}

impl CostVector {
    /// All entries must be finite and strictly positive.
    pub fn new(costs: Vec<f64>) -> Result<Self, CostError> {
        for (i, &c) in costs.iter().enumerate() {
            if !(c > 0.0 && c.is_finite()) {
                return Err(CostError::BadCost { row: i + 1, value: c.to_string() });
            }
        }
        Ok(CostVector { costs })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.costs
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.costs[k]
    }

    pub fn total(&self) -> f64 {
        self.costs.iter().sum()
    }

    pub fn scaled(&self, k: f64) -> CostVector {
        CostVector { costs: self.costs.iter().map(|c| c * k).collect() }
    }

    pub fn restrict(&self, columns: &[usize]) -> CostVector {
        CostVector { costs: columns.iter().map(|&c| self.costs[c]).collect() }
    }

    /// Writes `feature,cost` rows.
    pub fn write_csv<W: std::io::Write>(&self, names: &[String], out: W) -> Result<(), CostError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["feature", "cost"])?;
        for (name, c) in names.iter().zip(&self.costs) {
            w.write_record([name.as_str(), &c.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Parses `costs.csv` in either the component or the numeric form.
pub fn load_costs<R: Read>(src: R, feature_names: &[String], mapping: &LevelMapping) -> Result<CostVector, CostError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(src);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();

    enum Layout {
        Components { memory: usize, compute: usize, privacy: usize },
        Numeric,
    }
    let layout = match header.as_slice() {
        ["feature", "cost"] => Layout::Numeric,
        [first, rest @ ..] if *first == "feature" && rest.len() == 3 => {
            let pos = |name: &str| rest.iter().position(|h| *h == name).map(|p| p + 1);
            match (pos("memory"), pos("compute"), pos("privacy")) {
                (Some(memory), Some(compute), Some(privacy)) => Layout::Components { memory, compute, privacy },
                _ => return Err(CostError::Header),
            }
        }
        _ => return Err(CostError::Header),
    };

    let index: HashMap<&str, usize> = feature_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut costs: Vec<Option<f64>> = vec![None; feature_names.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != header.len() {
            return Err(CostError::Ragged { row, expected: header.len(), found: rec.len() });
        }
        let name = &rec[0];
        let k = *index
            .get(name)
            .ok_or_else(|| CostError::UnknownFeature { row, name: name.to_string() })?;
        if costs[k].is_some() {
            return Err(CostError::Duplicate { row, name: name.to_string() });
        }
        let cost = match layout {
            Layout::Numeric => match rec[1].parse::<f64>() {
                Ok(v) if v > 0.0 && v.is_finite() => v,
                _ => return Err(CostError::BadCost { row, value: rec[1].to_string() }),
            },
            Layout::Components { memory, compute, privacy } => {
                let level = |col: usize| {
                    rec[col]
                        .parse::<CostLevel>()
                        .map_err(|_| CostError::BadLevel { row, word: rec[col].to_string() })
                };
                FeatureCost::new(name, level(memory)?, level(compute)?, level(privacy)?, mapping).total
            }
        };
        costs[k] = Some(cost);
    }
    let costs = costs
        .into_iter()
        .zip(feature_names)
        .map(|(c, n)| c.ok_or_else(|| CostError::MissingFeature(n.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    CostVector::new(costs)
}

/// Total cost of the selected features.
pub fn selection_cost(costs: &CostVector, selection: &SelectionVector) -> f64 {
    assert_eq!(costs.len(), selection.len(), "cost vector and selection differ in length");
    costs
        .as_slice()
        .iter()
        .zip(selection.mask())
        .filter(|(_, &on)| on)
        .map(|(c, _)| c)
        .sum()
}

/// Budget check; the boundary is inclusive.
pub fn is_feasible(costs: &CostVector, selection: &SelectionVector, budget: f64) -> bool {
    selection_cost(costs, selection) <= budget
}
