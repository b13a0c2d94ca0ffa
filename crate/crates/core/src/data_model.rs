//! Datasets of per-device traffic features, device identities, stratified
//! train/test splits and column projection by a selection mask.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name of the trailing class column in `features.csv`.
pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{source_name}: missing or malformed header: {reason}")]
    Header { source_name: &'static str, reason: String },
    #[error("features: row {row} has {found} columns, expected {expected}")]
    Ragged { row: usize, found: usize, expected: usize },
    #[error("features: row {row}, column {column}: `{value}` is not a finite number")]
    BadNumber { row: usize, column: usize, value: String },
    #[error("features: row {row}: label `{label}` has no device metadata")]
    UnknownLabel { row: usize, label: String },
    #[error("devices: row {row}: {reason}")]
    BadDevice { row: usize, reason: String },
    #[error("class `{label}` has {count} rows, at least 2 are required")]
    ClassTooSmall { label: String, count: usize },
    #[error("train fraction {0} is outside (0, 1)")]
    BadFraction(f64),
    #[error("dataset has no rows")]
    Empty,
}

/// Lowercased, trimmed form used for all type/brand comparisons.
pub fn normalize_key(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Identity of one device class: the ordered pair (type, brand).
///
/// `display_name` is the string used in the `label` column of data files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceLabel {
    pub id: usize,
    pub type_name: String,
    pub brand: String,
    pub display_name: String,
}

impl DeviceLabel {
    pub fn same_type(&self, other: &DeviceLabel) -> bool {
        normalize_key(&self.type_name) == normalize_key(&other.type_name)
    }

    pub fn same_brand(&self, other: &DeviceLabel) -> bool {
        normalize_key(&self.brand) == normalize_key(&other.brand)
    }
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix { rows: rows.len(), cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }
}

/// Binary mask over the `m` candidate features. Serializes as a `0`/`1`
/// string, feature 0 first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct SelectionVector {
    mask: Vec<bool>,
}

impl SelectionVector {
    pub fn from_mask(mask: Vec<bool>) -> Self {
        SelectionVector { mask }
    }

    pub fn empty(m: usize) -> Self {
        SelectionVector { mask: vec![false; m] }
    }

    pub fn full(m: usize) -> Self {
        SelectionVector { mask: vec![true; m] }
    }

    /// Mask whose bit `k` is bit `k` of `bits`.
    pub fn from_bits(bits: u64, m: usize) -> Self {
        assert!(m <= 64);
        SelectionVector {
            mask: (0..m).map(|k| bits >> k & 1 == 1).collect(),
        }
    }

    pub fn from_indices(m: usize, indices: &[usize]) -> Self {
        let mut mask = vec![false; m];
        for &i in indices {
            mask[i] = true;
        }
        SelectionVector { mask }
    }

    /// Parses a string of `0`/`1` characters, feature 0 first.
    pub fn parse_bitstring(s: &str) -> Option<Self> {
        s.chars()
            .map(|ch| match ch {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(SelectionVector::from_mask)
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn get(&self, k: usize) -> bool {
        self.mask[k]
    }

    pub fn set(&mut self, k: usize, value: bool) {
        self.mask[k] = value;
    }

    pub fn count_selected(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn selected_indices(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    pub fn and(&self, other: &SelectionVector) -> SelectionVector {
        assert_eq!(self.len(), other.len());
        SelectionVector::from_mask(self.mask.iter().zip(&other.mask).map(|(a, b)| *a && *b).collect())
    }

    pub fn or(&self, other: &SelectionVector) -> SelectionVector {
        assert_eq!(self.len(), other.len());
        SelectionVector::from_mask(self.mask.iter().zip(&other.mask).map(|(a, b)| *a || *b).collect())
    }

    pub fn to_bitstring(&self) -> String {
        self.mask.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

impl From<SelectionVector> for String {
    fn from(v: SelectionVector) -> String {
        v.to_bitstring()
    }
}

impl TryFrom<String> for SelectionVector {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        SelectionVector::parse_bitstring(&s).ok_or_else(|| format!("invalid selection bitstring `{s}`"))
    }
}

impl fmt::Display for SelectionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

/// Labeled feature matrix together with the device catalogue.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    feature_names: Vec<String>,
    devices: Vec<DeviceLabel>,
}

impl Dataset {
    /// Builds and validates a dataset. Device ids must equal their position.
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        devices: Vec<DeviceLabel>,
    ) -> Result<Self, DataError> {
        if features.rows() == 0 {
            return Err(DataError::Empty);
        }
        if feature_names.len() != features.cols() {
            return Err(DataError::Header {
                source_name: "features",
                reason: format!(
                    "{} feature names for {} columns",
                    feature_names.len(),
                    features.cols()
                ),
            });
        }
        for (i, d) in devices.iter().enumerate() {
            if d.id != i {
                return Err(DataError::BadDevice {
                    row: i + 1,
                    reason: format!("device id {} at position {}", d.id, i),
                });
            }
            if d.type_name.trim().is_empty() || d.brand.trim().is_empty() {
                return Err(DataError::BadDevice {
                    row: i + 1,
                    reason: "empty type or brand".into(),
                });
            }
        }
        for (r, &l) in labels.iter().enumerate() {
            if l >= devices.len() {
                return Err(DataError::UnknownLabel { row: r + 1, label: l.to_string() });
            }
            for c in 0..features.cols() {
                let v = features.get(r, c);
                if !v.is_finite() {
                    return Err(DataError::BadNumber { row: r + 1, column: c + 1, value: v.to_string() });
                }
            }
        }
        let mut counts = vec![0usize; devices.len()];
        for &l in &labels {
            counts[l] += 1;
        }
        for (d, &count) in devices.iter().zip(&counts) {
            if count < 2 {
                return Err(DataError::ClassTooSmall { label: d.display_name.clone(), count });
            }
        }
        Ok(Dataset { features, labels, feature_names, devices })
    }

    /// Reads `features.csv` and `devices.csv`.
    ///
    /// Rows and columns in error messages are 1-based; row 1 is the first
    /// data row after the header.
    pub fn load<R1: Read, R2: Read>(features_src: R1, devices_src: R2) -> Result<Self, DataError> {
        let (devices, by_label) = read_devices(devices_src)?;

        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(features_src);
        let header = rdr.headers()?.clone();
        if header.is_empty() || &header[header.len() - 1] != LABEL_COLUMN {
            return Err(DataError::Header {
                source_name: "features",
                reason: format!("last column must be `{LABEL_COLUMN}`"),
            });
        }
        let m = header.len() - 1;
        let feature_names: Vec<String> = header.iter().take(m).map(str::to_string).collect();

        let mut data = Vec::new();
        let mut labels = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            if rec.len() != m + 1 {
                return Err(DataError::Ragged { row, found: rec.len(), expected: m + 1 });
            }
            for c in 0..m {
                let cell = &rec[c];
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => data.push(v),
                    _ => {
                        return Err(DataError::BadNumber { row, column: c + 1, value: cell.to_string() })
                    }
                }
            }
            let label = &rec[m];
            match by_label.get(label) {
                Some(&id) => labels.push(id),
                None => return Err(DataError::UnknownLabel { row, label: label.to_string() }),
            }
        }
        let rows = labels.len();
        Dataset::new(Matrix::new(rows, m, data), labels, feature_names, devices)
    }

    /// Writes `features.csv` in the same format `load` reads.
    pub fn write_features<W: Write>(&self, out: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(LABEL_COLUMN);
        w.write_record(&header)?;
        for r in 0..self.n_rows() {
            let mut rec: Vec<String> = self.features.row(r).iter().map(|v| v.to_string()).collect();
            rec.push(self.devices[self.labels[r]].display_name.clone());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `devices.csv` (`label,type,brand`).
    pub fn write_devices<W: Write>(&self, out: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["label", "type", "brand"])?;
        for d in &self.devices {
            w.write_record([&d.display_name, &d.type_name, &d.brand])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn devices(&self) -> &[DeviceLabel] {
        &self.devices
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.devices.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Keeps only the listed feature columns, in the listed order.
    pub fn restrict_features(&self, columns: &[usize]) -> Dataset {
        let rows = self.n_rows();
        let mut data = Vec::with_capacity(rows * columns.len());
        for r in 0..rows {
            let row = self.features.row(r);
            data.extend(columns.iter().map(|&c| row[c]));
        }
        Dataset {
            features: Matrix::new(rows, columns.len(), data),
            labels: self.labels.clone(),
            feature_names: columns.iter().map(|&c| self.feature_names[c].clone()).collect(),
            devices: self.devices.clone(),
        }
    }
}

/// Reads a `label,type,brand` table on its own. Ids follow row order.
pub fn load_devices<R: Read>(src: R) -> Result<Vec<DeviceLabel>, DataError> {
    read_devices(src).map(|(devices, _)| devices)
}

fn read_devices<R: Read>(src: R) -> Result<(Vec<DeviceLabel>, HashMap<String, usize>), DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(src);
    let header: Vec<String> = rdr.headers()?.iter().map(normalize_key).collect();
    if header.len() < 3 || header[0] != "label" || header[1] != "type" || header[2] != "brand" {
        return Err(DataError::Header {
            source_name: "devices",
            reason: "expected `label,type,brand`".into(),
        });
    }
    let mut devices = Vec::new();
    let mut by_label = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() < 3 {
            return Err(DataError::BadDevice { row, reason: "expected at least 3 columns".into() });
        }
        let (label, type_name, brand) = (&rec[0], &rec[1], &rec[2]);
        if label.is_empty() || type_name.is_empty() || brand.is_empty() {
            return Err(DataError::BadDevice { row, reason: "empty label, type or brand".into() });
        }
        if by_label.contains_key(label) {
            return Err(DataError::BadDevice { row, reason: format!("duplicate label `{label}`") });
        }
        let id = devices.len();
        by_label.insert(label.to_string(), id);
        devices.push(DeviceLabel {
            id,
            type_name: type_name.to_string(),
            brand: brand.to_string(),
            display_name: label.to_string(),
        });
    }
    Ok((devices, by_label))
}

/// Disjoint train/test row index lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub train_fraction: f64,
}

/// Per-class seeded shuffle; the first `ceil(fraction * count)` rows of each
/// class go to train, clamped so both parts get at least one row.
pub fn stratified_split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<Split, DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::BadFraction(train_fraction));
    }
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.n_classes()];
    for (r, &l) in dataset.labels().iter().enumerate() {
        per_class[l].push(r);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, rows) in per_class.iter_mut().enumerate() {
        let count = rows.len();
        if count < 2 {
            return Err(DataError::ClassTooSmall {
                label: dataset.devices()[class].display_name.clone(),
                count,
            });
        }
        rows.shuffle(&mut rng);
        let n_train = ((train_fraction * count as f64) - 1e-9).ceil() as usize;
        let n_train = n_train.clamp(1, count - 1);
        train.extend_from_slice(&rows[..n_train]);
        test.extend_from_slice(&rows[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test, seed, train_fraction })
}

/// Rows `rows` of the dataset restricted to the selected columns.
pub fn project(dataset: &Dataset, rows: &[usize], selection: &SelectionVector) -> (Matrix, Vec<usize>) {
    assert_eq!(selection.len(), dataset.n_features(), "selection length must equal m");
    let cols = selection.selected_indices();
    let mut data = Vec::with_capacity(rows.len() * cols.len());
    let mut labels = Vec::with_capacity(rows.len());
    for &r in rows {
        let row = dataset.features().row(r);
        data.extend(cols.iter().map(|&c| row[c]));
        labels.push(dataset.labels()[r]);
    }
    (Matrix::new(rows.len(), cols.len(), data), labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let features = "a,b,label\n1,2,x\n3,4,x\n5,6,y\n7,8,y\n";
        let devices = "label,type,brand\nx,camera,Acme\ny,plug,Acme\n";
        Dataset::load(features.as_bytes(), devices.as_bytes()).unwrap()
    }

    #[test]
    fn loads_minimal_input() {
        let ds = tiny();
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.n_classes(), 2);
        assert_eq!(ds.labels(), &[0, 0, 1, 1]);
        assert_eq!(ds.feature_names(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn nan_cell_reports_position() {
        let mut s = String::from("f1,f2,f3,label\n");
        for i in 0..10 {
            let third = if i == 6 { "NaN".to_string() } else { i.to_string() };
            s.push_str(&format!("0,1,{third},{}\n", if i % 2 == 0 { "x" } else { "y" }));
        }
        let devices = "label,type,brand\nx,camera,Acme\ny,plug,Acme\n";
        let err = Dataset::load(s.as_bytes(), devices.as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, DataError::BadNumber { row: 7, column: 3, .. }), "{msg}");
        assert!(msg.contains("row 7") && msg.contains("column 3"));
    }

    #[test]
    fn rejects_ragged_unknown_label_and_small_class() {
        let devices = "label,type,brand\nx,camera,Acme\ny,plug,Acme\n";
        let ragged = "a,label\n1,x\n2\n";
        assert!(matches!(
            Dataset::load(ragged.as_bytes(), devices.as_bytes()),
            Err(DataError::Ragged { row: 2, .. })
        ));
        let unknown = "a,label\n1,x\n2,z\n";
        assert!(matches!(
            Dataset::load(unknown.as_bytes(), devices.as_bytes()),
            Err(DataError::UnknownLabel { row: 2, .. })
        ));
        let small = "a,label\n1,x\n2,x\n3,y\n";
        assert!(matches!(
            Dataset::load(small.as_bytes(), devices.as_bytes()),
            Err(DataError::ClassTooSmall { count: 1, .. })
        ));
        let inf = "a,label\n1,x\ninf,x\n3,y\n4,y\n";
        assert!(matches!(
            Dataset::load(inf.as_bytes(), devices.as_bytes()),
            Err(DataError::BadNumber { row: 2, column: 1, .. })
        ));
    }

    #[test]
    fn device_comparison_ignores_case_and_whitespace() {
        let a = DeviceLabel { id: 0, type_name: "Camera".into(), brand: " TP-Link".into(), display_name: "a".into() };
        let b = DeviceLabel { id: 1, type_name: "camera ".into(), brand: "tp-link".into(), display_name: "b".into() };
        assert!(a.same_type(&b) && a.same_brand(&b));
    }

    fn balanced(counts: &[usize]) -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for i in 0..n {
                rows.push(vec![i as f64, c as f64]);
                labels.push(c);
            }
        }
        let devices = (0..counts.len())
            .map(|id| DeviceLabel {
                id,
                type_name: format!("t{id}"),
                brand: "b".into(),
                display_name: format!("d{id}"),
            })
            .collect();
        Dataset::new(Matrix::from_rows(&rows), labels, vec!["u".into(), "v".into()], devices).unwrap()
    }

    #[test]
    fn split_exact_fraction() {
        let ds = balanced(&[10, 10]);
        let s = stratified_split(&ds, 0.8, 1).unwrap();
        for class in 0..2 {
            assert_eq!(s.train.iter().filter(|&&r| ds.labels()[r] == class).count(), 8);
            assert_eq!(s.test.iter().filter(|&&r| ds.labels()[r] == class).count(), 2);
        }
    }

    #[test]
    fn split_leaves_one_test_row() {
        let ds = balanced(&[2]);
        let s = stratified_split(&ds, 0.9, 3).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (1, 1));
    }

    #[test]
    fn split_is_deterministic() {
        let ds = balanced(&[7, 9, 4]);
        assert_eq!(stratified_split(&ds, 0.7, 42).unwrap(), stratified_split(&ds, 0.7, 42).unwrap());
        assert!(matches!(stratified_split(&ds, 1.0, 0), Err(DataError::BadFraction(_))));
    }

    #[test]
    fn projection_cases() {
        let ds = tiny();
        let rows = [0, 2, 3];
        let (all, labels) = project(&ds, &rows, &SelectionVector::full(2));
        assert_eq!(all, Matrix::from_rows(&[vec![1.0, 2.0], vec![5.0, 6.0], vec![7.0, 8.0]]));
        assert_eq!(labels, vec![0, 1, 1]);
        let (one, _) = project(&ds, &rows, &SelectionVector::from_indices(2, &[1]));
        assert_eq!(one.column(0), vec![2.0, 6.0, 8.0]);
        let (none, labels) = project(&ds, &rows, &SelectionVector::empty(2));
        assert_eq!((none.rows(), none.cols()), (3, 0));
        assert_eq!(labels, vec![0, 1, 1]);
    }

    #[test]
    fn bitstring_round_trip() {
        let v = SelectionVector::from_bits(0b1011, 5);
        assert_eq!(v.to_bitstring(), "11010");
        assert_eq!(SelectionVector::parse_bitstring("11010"), Some(v));
        assert_eq!(SelectionVector::parse_bitstring("1x"), None);
    }
}
