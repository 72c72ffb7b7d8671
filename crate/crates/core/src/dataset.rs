//! Tabular data, CSV ingestion, seeded splitting and synthetic generators.
//!
//! All randomness flows through [`rng_from_seed`], a xoshiro256++ generator
//! seeded through SplitMix64, so every generator is reproducible bit for bit
//! on any platform.

use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

use crate::linalg::Matrix;

/// Odd 64-bit constant used to derive per-replication seeds.
pub const SEED_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn rng_from_seed(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Seed for replication `rep` of a study started from `base`.
pub fn replication_seed(base: u64, rep: u64) -> u64 {
    base.wrapping_add(rep.wrapping_mul(SEED_MIX))
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot parse {value:?} at row {row}, column {column:?}")]
    Parse { row: usize, column: String, value: String },
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("table has no labels")]
    Unlabeled,
    #[error("empty table")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Covariates with optional responses.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    x: Matrix<f64>,
    y: Option<Vec<f64>>,
    column_names: Vec<String>,
}

impl DataTable {
    pub fn new(x: Matrix<f64>, y: Option<Vec<f64>>, column_names: Vec<String>) -> Result<Self, DataError> {
        if column_names.len() != x.ncols() {
            return Err(DataError::DimensionMismatch(format!(
                "{} column names for {} covariates",
                column_names.len(),
                x.ncols()
            )));
        }
        if let Some(y) = &y {
            if y.len() != x.nrows() {
                return Err(DataError::DimensionMismatch(format!(
                    "{} labels for {} rows",
                    y.len(),
                    x.nrows()
                )));
            }
            if let Some(i) = y.iter().position(|v| !v.is_finite()) {
                return Err(DataError::NonFinite { row: i, column: x.ncols() });
            }
        }
        for (i, r) in x.rows_iter().enumerate() {
            if let Some(j) = r.iter().position(|v| !v.is_finite()) {
                return Err(DataError::NonFinite { row: i, column: j });
            }
        }
        Ok(Self { x, y, column_names })
    }

    /// Table with generated names `x1..xd`.
    pub fn from_parts(x: Matrix<f64>, y: Option<Vec<f64>>) -> Result<Self, DataError> {
        let names = default_names(x.ncols());
        Self::new(x, y, names)
    }

    pub fn x(&self) -> &Matrix<f64> {
        &self.x
    }

    pub fn y(&self) -> Option<&[f64]> {
        self.y.as_deref()
    }

    pub fn labels(&self) -> Result<&[f64], DataError> {
        self.y.as_deref().ok_or(DataError::Unlabeled)
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_labeled(&self) -> bool {
        self.y.is_some()
    }

    /// Same covariates with the responses dropped.
    pub fn without_labels(&self) -> DataTable {
        DataTable {
            x: self.x.clone(),
            y: None,
            column_names: self.column_names.clone(),
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> DataTable {
        DataTable {
            x: self.x.select_rows(idx),
            y: self.y.as_ref().map(|y| idx.iter().map(|&i| y[i]).collect()),
            column_names: self.column_names.clone(),
        }
    }

    /// Row-wise concatenation; labels survive only if both sides have them.
    pub fn concat(&self, other: &DataTable) -> Result<DataTable, DataError> {
        let x = self.x.vstack(&other.x).ok_or_else(|| {
            DataError::DimensionMismatch(format!("cannot stack {} and {} columns", self.dim(), other.dim()))
        })?;
        let y = match (&self.y, &other.y) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Ok(DataTable {
            x,
            y,
            column_names: self.column_names.clone(),
        })
    }

    /// Writes covariates, then the label column `y` when present.
    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = self.column_names.clone();
        if self.y.is_some() {
            header.push("y".into());
        }
        w.write_record(&header)?;
        for (i, r) in self.x.rows_iter().enumerate() {
            let mut rec: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            if let Some(y) = &self.y {
                rec.push(y[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn default_names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

/// Reads a headed, comma-separated numeric file. The named label column, if
/// any, becomes `y`; every other column is a covariate.
pub fn load_csv(path: &Path, label_column: Option<&str>) -> Result<DataTable, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_idx = match label_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DataError::MissingColumn(name.to_string()))?,
        ),
        None => None,
    };
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let mut data = Vec::new();
    let mut y = Vec::new();
    let mut n = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        // Row numbers are 1-based over data lines, matching what an editor
        // shows below the header.
        let row = i + 1;
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| DataError::Parse {
                row,
                column: headers.get(j).cloned().unwrap_or_else(|| j.to_string()),
                value: cell.to_string(),
            })?;
            if Some(j) == label_idx {
                y.push(v);
            } else {
                data.push(v);
            }
        }
        n += 1;
    }
    let x = Matrix::from_vec(n, names.len(), data)
        .ok_or_else(|| DataError::DimensionMismatch("ragged rows".into()))?;
    DataTable::new(x, label_idx.map(|_| y), names)
}

/// Block fractions and the permutation seed for [`split`].
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub fractions: Vec<f64>,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(fractions: Vec<f64>, seed: u64) -> Result<Self, DataError> {
        if fractions.is_empty() || fractions.iter().any(|&f| !(f > 0.0)) {
            return Err(DataError::InvalidSplit("fractions must be positive".into()));
        }
        let total: f64 = fractions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(DataError::InvalidSplit(format!("fractions sum to {total}, not 1")));
        }
        Ok(Self { fractions, seed })
    }

    /// Part sizes for `n` rows: floors of `f·n`, then the remainder handed out
    /// one row at a time from the left.
    pub fn sizes(&self, n: usize) -> Vec<usize> {
        let mut sizes: Vec<usize> = self.fractions.iter().map(|f| (f * n as f64).floor() as usize).collect();
        let mut assigned: usize = sizes.iter().sum();
        while assigned > n {
            // Rounding can only overshoot by a hair; trim from the right.
            let j = sizes.iter().rposition(|&s| s > 0).unwrap();
            sizes[j] -= 1;
            assigned -= 1;
        }
        let k = sizes.len();
        for j in 0..(n - assigned) {
            sizes[j % k] += 1;
        }
        sizes
    }
}

/// Seeded permutation followed by contiguous blocks.
pub fn split(t: &DataTable, s: &SplitSpec) -> Result<Vec<DataTable>, DataError> {
    let n = t.n_rows();
    if n < s.fractions.len() {
        return Err(DataError::InvalidSplit(format!(
            "{n} rows cannot fill {} parts",
            s.fractions.len()
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from_seed(s.seed));
    let mut start = 0;
    Ok(s.sizes(n)
        .into_iter()
        .map(|len| {
            let part = t.select_rows(&perm[start..start + len]);
            start += len;
            part
        })
        .collect())
}

/// Draws `m` rows with replacement, row `i` with probability proportional
/// to `exp(log_w[i])`.
pub fn resample_log_weights(t: &DataTable, log_w: &[f64], m: usize, seed: u64) -> Result<DataTable, DataError> {
    if log_w.len() != t.n_rows() {
        return Err(DataError::DimensionMismatch(format!(
            "{} weights for {} rows",
            log_w.len(),
            t.n_rows()
        )));
    }
    if t.n_rows() == 0 {
        return Err(DataError::Empty);
    }
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(DataError::InvalidSplit("resampling weights are degenerate".into()));
    }
    let w: Vec<f64> = log_w.iter().map(|&l| (l - top).exp()).collect();
    let dist = WeightedIndex::new(&w).map_err(|e| DataError::InvalidSplit(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let idx: Vec<usize> = (0..m).map(|_| dist.sample(&mut rng)).collect();
    Ok(t.select_rows(&idx))
}

fn scores(t: &DataTable, beta: &[f64]) -> Result<Vec<f64>, DataError> {
    if beta.len() != t.dim() {
        return Err(DataError::DimensionMismatch(format!(
            "tilt has {} entries for {} covariates",
            beta.len(),
            t.dim()
        )));
    }
    Ok(t.x.rows_iter().map(|r| r.iter().zip(beta).map(|(a, b)| a * b).sum()).collect())
}

/// Exponential tilt: weights `exp(xᵀβ)`, handled in log space.
pub fn tilt_resample(t: &DataTable, beta: &[f64], m: usize, seed: u64) -> Result<DataTable, DataError> {
    let s = scores(t, beta)?;
    resample_log_weights(t, &s, m, seed)
}

/// Logistic tilt: weights `1/(1 + exp(−xᵀβ))`.
pub fn logistic_resample(t: &DataTable, beta: &[f64], m: usize, seed: u64) -> Result<DataTable, DataError> {
    let s = scores(t, beta)?;
    // log σ(s) = −log(1 + e^{−s})
    let log_w: Vec<f64> = s.iter().map(|&v| -softplus(-v)).collect();
    resample_log_weights(t, &log_w, m, seed)
}

fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

/// Maps every covariate row to `A·x + b`; labels are untouched.
pub fn affine_shift(t: &DataTable, a: &Matrix<f64>, b: &[f64]) -> Result<DataTable, DataError> {
    let d = t.dim();
    if a.nrows() != d || a.ncols() != d || b.len() != d {
        return Err(DataError::DimensionMismatch(format!(
            "affine map {}x{} + {} on {d} covariates",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let mut x = Matrix::zeros(t.n_rows(), d);
    for (i, r) in t.x.rows_iter().enumerate() {
        let out = a.matvec(r);
        for j in 0..d {
            x[(i, j)] = out[j] + b[j];
        }
    }
    DataTable::new(x, t.y.clone(), t.column_names.clone())
}

/// `X ~ U[−1,1]`, `ξ ~ U[−1,1]`, `Y = √(1 + 25X⁴)·ξ`.
pub fn gen_hetero_sim(n: usize, seed: u64) -> DataTable {
    let mut rng = rng_from_seed(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x: f64 = rng.gen_range(-1.0..=1.0);
        let xi: f64 = rng.gen_range(-1.0..=1.0);
        xs.push(x);
        ys.push(hetero_scale(x) * xi);
    }
    DataTable::from_parts(Matrix::column_vector(&xs), Some(ys)).expect("generator output is finite")
}

/// Noise scale `√(1 + 25x⁴)` of [`gen_hetero_sim`].
pub fn hetero_scale(x: f64) -> f64 {
    (1.0 + 25.0 * x.powi(4)).sqrt()
}

/// `X ~ N(0, I_d)`, `Y = (Σ_j X_j)/√d + (0.5 + 0.5|X₁|)·ε` with `ε ~ N(0,1)`.
pub fn gen_gaussian_sim(n: usize, d: usize, seed: u64) -> DataTable {
    assert!(d >= 1, "at least one covariate");
    let mut rng = rng_from_seed(seed);
    let mut data = Vec::with_capacity(n * d);
    let mut ys = Vec::with_capacity(n);
    let scale = (d as f64).sqrt();
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let eps: f64 = rng.sample(StandardNormal);
        ys.push(row.iter().sum::<f64>() / scale + (0.5 + 0.5 * row[0].abs()) * eps);
        data.extend(row);
    }
    DataTable::from_parts(Matrix::from_vec(n, d, data).unwrap(), Some(ys)).expect("generator output is finite")
}
