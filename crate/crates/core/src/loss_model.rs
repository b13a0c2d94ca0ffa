//! Misclassification loss matrices.

use std::collections::HashMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::DeviceLabel;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("loss: nonzero diagonal for device `{device}` ({value})")]
    NonzeroDiagonal { device: String, value: f64 },
    #[error("loss: negative or non-finite entry {value} at ({row}, {col})")]
    BadEntry { row: String, col: String, value: f64 },
    #[error("loss: cell `{value}` for ({row}, {col}) is not a number")]
    NotANumber { row: String, col: String, value: String },
    #[error("loss: device `{0}` is missing from the table")]
    MissingDevice(String),
    #[error("loss: unknown device `{0}`")]
    UnknownDevice(String),
    #[error("loss: expected a {expected}x{expected} table, found {rows}x{cols}")]
    Dimension { expected: usize, rows: usize, cols: usize },
}

/// `values[i][j]` is the loss of predicting device `i` when the truth is `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossMatrix {
    values: Vec<Vec<f64>>,
}

impl LossMatrix {
    /// Validates a square matrix with zero diagonal and nonnegative entries.
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self, LossError> {
        let n = values.len();
        for (i, row) in values.iter().enumerate() {
            if row.len() != n {
                return Err(LossError::Dimension { expected: n, rows: n, cols: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(LossError::BadEntry { row: i.to_string(), col: j.to_string(), value: v });
                }
            }
            if row[i] != 0.0 {
                return Err(LossError::NonzeroDiagonal { device: i.to_string(), value: row[i] });
            }
        }
        Ok(LossMatrix { values })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn scaled(&self, k: f64) -> LossMatrix {
        LossMatrix {
            values: self.values.iter().map(|r| r.iter().map(|v| v * k).collect()).collect(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..n).all(|j| self.values[i][j] == self.values[j][i]))
    }

    pub fn max_entry(&self) -> f64 {
        self.values.iter().flatten().copied().fold(0.0, f64::max)
    }
}

/// Two points for a wrong device type plus one for a wrong brand.
pub fn build_default_loss(devices: &[DeviceLabel]) -> LossMatrix {
    let values = devices
        .iter()
        .map(|di| {
            devices
                .iter()
                .map(|dj| 2.0 * (!di.same_type(dj)) as u8 as f64 + (!di.same_brand(dj)) as u8 as f64)
                .collect()
        })
        .collect();
    LossMatrix { values }
}

/// Reads a square table whose first row and column name the devices.
///
/// Rows and columns may be listed in any order; the result is indexed by
/// device id.
pub fn load_loss<R: Read>(src: R, devices: &[DeviceLabel]) -> Result<LossMatrix, LossError> {
    let n = devices.len();
    let index: HashMap<&str, usize> = devices.iter().map(|d| (d.display_name.as_str(), d.id)).collect();
    let lookup = |name: &str| index.get(name).copied().ok_or_else(|| LossError::UnknownDevice(name.to_string()));

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(src);
    let header = rdr.headers()?.clone();
    let col_ids = header.iter().skip(1).map(lookup).collect::<Result<Vec<_>, _>>()?;

    let records = rdr.records().collect::<Result<Vec<_>, _>>()?;
    if col_ids.len() != n || records.len() != n {
        return Err(LossError::Dimension { expected: n, rows: records.len(), cols: col_ids.len() });
    }
    let mut values = vec![vec![f64::NAN; n]; n];
    let mut seen_rows = vec![false; n];
    for rec in &records {
        if rec.len() != n + 1 {
            return Err(LossError::Dimension { expected: n, rows: records.len(), cols: rec.len().saturating_sub(1) });
        }
        let i = lookup(&rec[0])?;
        seen_rows[i] = true;
        for (cell, &j) in rec.iter().skip(1).zip(&col_ids) {
            let v = cell.parse::<f64>().map_err(|_| LossError::NotANumber {
                row: rec[0].to_string(),
                col: devices[j].display_name.clone(),
                value: cell.to_string(),
            })?;
            values[i][j] = v;
        }
    }
    for d in devices {
        if !seen_rows[d.id] || values[d.id].iter().any(|v| v.is_nan()) {
            return Err(LossError::MissingDevice(d.display_name.clone()));
        }
    }
    for d in devices {
        let diag = values[d.id][d.id];
        if diag != 0.0 {
            return Err(LossError::NonzeroDiagonal { device: d.display_name.clone(), value: diag });
        }
        for e in devices {
            let v = values[d.id][e.id];
            if !(v >= 0.0 && v.is_finite()) {
                return Err(LossError::BadEntry {
                    row: d.display_name.clone(),
                    col: e.display_name.clone(),
                    value: v,
                });
            }
        }
    }
    Ok(LossMatrix { values })
}

/// Writes the matrix in the format `load_loss` reads.
pub fn write_loss<W: std::io::Write>(loss: &LossMatrix, devices: &[DeviceLabel], out: W) -> Result<(), LossError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![String::new()];
    header.extend(devices.iter().map(|d| d.display_name.clone()));
    w.write_record(&header)?;
    for d in devices {
        let mut rec = vec![d.display_name.clone()];
        rec.extend(loss.values[d.id].iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
