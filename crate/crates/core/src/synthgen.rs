//! Seeded synthetic device-traffic datasets with known structure.
//!
//! Device `d` draws its rows from an isotropic Gaussian. On informative
//! column `j` its mean is `class_separation * code[d][j]` with `code` a 0/1
//! pattern; all other columns have mean 0. The first `ceil(log2 n)`
//! informative columns carry the binary encoding of `d`, so the informative
//! block as a whole separates every pair of devices, while any single column
//! separates only some pairs. Remaining informative columns get random
//! non-constant patterns.
//!
//! Informative columns are always the first `n_informative` columns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost_model::CostVector;
use crate::data_model::{Dataset, DeviceLabel, Matrix};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_devices: usize,
    /// Device types, cycled over devices.
    pub types: Vec<String>,
    /// Device brands; device `d` gets `brands[(d / types.len()) % brands.len()]`.
    pub brands: Vec<String>,
    pub m_features: usize,
    pub n_informative: usize,
    pub rows_per_device: usize,
    pub class_separation: f64,
    pub noise_std: f64,
    /// Feature costs, cycled over columns.
    pub cost_cycle: Vec<f64>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_devices: 4,
            types: vec!["camera".into(), "plug".into()],
            brands: vec!["acme".into(), "globex".into()],
            m_features: 10,
            n_informative: 4,
            rows_per_device: 40,
            class_separation: 10.0,
            noise_std: 1.0,
            cost_cycle: vec![1.0, 2.0, 3.0],
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |s: &str| Err(SynthError::Invalid(s.into()));
        if self.n_devices < 2 {
            return bad("n_devices must be at least 2");
        }
        if self.rows_per_device < 4 {
            return bad("rows_per_device must be at least 4");
        }
        if self.n_informative > self.m_features {
            return bad("n_informative exceeds m_features");
        }
        if !(self.class_separation > 0.0 && self.noise_std > 0.0) {
            return bad("class_separation and noise_std must be positive");
        }
        if self.types.is_empty() || self.brands.is_empty() || self.types.iter().chain(&self.brands).any(|s| s.trim().is_empty()) {
            return bad("types and brands must be nonempty strings");
        }
        if self.cost_cycle.is_empty() || self.cost_cycle.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return bad("cost_cycle must hold positive costs");
        }
        Ok(())
    }

    pub fn device_type(&self, d: usize) -> &str {
        &self.types[d % self.types.len()]
    }

    pub fn device_brand(&self, d: usize) -> &str {
        &self.brands[(d / self.types.len()) % self.brands.len()]
    }
}

/// 0/1 mean pattern, `codes[d][j]` for informative column `j`.
fn mean_codes(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<Vec<u8>> {
    let n = spec.n_devices;
    let bits = usize::BITS as usize - (n - 1).leading_zeros() as usize;
    let mut codes = vec![vec![0u8; spec.n_informative]; n];
    for j in 0..spec.n_informative {
        if j < bits {
            for (d, code) in codes.iter_mut().enumerate() {
                code[j] = (d >> j & 1) as u8;
            }
        } else {
            for code in codes.iter_mut() {
                code[j] = rng.random_bool(0.5) as u8;
            }
            if codes.iter().all(|c| c[j] == codes[0][j]) {
                let d = rng.random_range(0..n);
                codes[d][j] ^= 1;
            }
        }
    }
    codes
}

pub fn generate(spec: &SynthSpec) -> Result<(Dataset, CostVector), SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let codes = mean_codes(spec, &mut rng);
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| SynthError::Invalid(e.to_string()))?;

    let m = spec.m_features;
    let rows = spec.n_devices * spec.rows_per_device;
    let mut data = Vec::with_capacity(rows * m);
    let mut labels = Vec::with_capacity(rows);
    for (d, code) in codes.iter().enumerate() {
        for _ in 0..spec.rows_per_device {
            for j in 0..m {
                let mean = code.get(j).map_or(0.0, |&b| b as f64 * spec.class_separation);
                data.push(mean + noise.sample(&mut rng));
            }
            labels.push(d);
        }
    }
    let devices = (0..spec.n_devices)
        .map(|d| DeviceLabel {
            id: d,
            type_name: spec.device_type(d).to_string(),
            brand: spec.device_brand(d).to_string(),
            display_name: format!("dev{d}"),
        })
        .collect();
    let names = (0..m).map(|j| format!("f{j}")).collect();
    let dataset = Dataset::new(Matrix::new(rows, m, data), labels, names, devices)
        .map_err(|e| SynthError::Invalid(e.to_string()))?;
    let costs = CostVector::new((0..m).map(|j| spec.cost_cycle[j % spec.cost_cycle.len()]).collect())
        .map_err(|e| SynthError::Invalid(e.to_string()))?;
    Ok((dataset, costs))
}
