//! Mean model, squared residuals and the bank of nonnegative candidate width
//! functions whose nonnegative span is searched by the aggregation step.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DataTable;
use crate::linalg::Matrix;
use crate::numerics::{empirical_quantile, ols_fit, quantile_reg_fit, LinearModel, NumericsError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CandidateError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("training table has no labels")]
    Unlabeled,
    #[error("invalid candidate: {0}")]
    InvalidSpec(String),
    #[error("bin {bin} of candidate {candidate} is empty")]
    EmptyBin { candidate: usize, bin: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Per-column centring and scaling learned on training covariates. Columns
/// with zero spread keep unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix<f64>) -> Self {
        let mean = x.column_means();
        let d = x.ncols();
        let n = x.nrows();
        let mut scale = vec![0.0; d];
        for r in x.rows_iter() {
            for j in 0..d {
                scale[j] += (r[j] - mean[j]).powi(2);
            }
        }
        for s in &mut scale {
            let sd = if n > 1 { (*s / (n - 1) as f64).sqrt() } else { 0.0 };
            *s = if sd > 0.0 { sd } else { 1.0 };
        }
        Self { mean, scale }
    }

    pub fn apply(&self, x: &Matrix<f64>) -> Matrix<f64> {
        let mut out = x.clone();
        for i in 0..out.nrows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
        out
    }
}

/// Training rows in standardized coordinates, searched by brute force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborIndex {
    pub standardizer: Standardizer,
    pub points: Matrix<f64>,
}

impl NeighborIndex {
    pub fn new(x: &Matrix<f64>) -> Self {
        let standardizer = Standardizer::fit(x);
        let points = standardizer.apply(x);
        Self { standardizer, points }
    }

    fn sq_dists(&self, q: &[f64]) -> Vec<f64> {
        self.points
            .rows_iter()
            .map(|r| r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect()
    }

    /// Indices of the `k` nearest training rows to each query row; ties in
    /// distance go to the lower row index.
    pub fn nearest(&self, x: &Matrix<f64>, k: usize) -> Vec<Vec<usize>> {
        let q = self.standardizer.apply(x);
        let k = k.min(self.points.nrows());
        q.rows_iter()
            .map(|r| {
                let d = self.sq_dists(r);
                let mut idx: Vec<usize> = (0..d.len()).collect();
                let cmp = |a: &usize, b: &usize| d[*a].total_cmp(&d[*b]).then(a.cmp(b));
                if k < idx.len() {
                    idx.select_nth_unstable_by(k, cmp);
                    idx.truncate(k);
                }
                idx.sort_by(cmp);
                idx
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MeanMethod {
    Ols,
    Knn { k: usize },
}

impl Default for MeanMethod {
    fn default() -> Self {
        MeanMethod::Ols
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MeanModel {
    Ols { model: LinearModel<f64> },
    Knn { k: usize, index: NeighborIndex, y: Vec<f64> },
}

impl MeanModel {
    pub fn dim(&self) -> usize {
        match self {
            MeanModel::Ols { model } => model.dim(),
            MeanModel::Knn { index, .. } => index.points.ncols(),
        }
    }

    pub fn predict(&self, x: &Matrix<f64>) -> Result<Vec<f64>, CandidateError> {
        if x.ncols() != self.dim() {
            return Err(CandidateError::DimensionMismatch(format!(
                "mean model expects {} covariates, got {}",
                self.dim(),
                x.ncols()
            )));
        }
        Ok(match self {
            MeanModel::Ols { model } => model.predict(x),
            MeanModel::Knn { k, index, y } => index
                .nearest(x, *k)
                .into_iter()
                .map(|nb| nb.iter().map(|&i| y[i]).sum::<f64>() / nb.len() as f64)
                .collect(),
        })
    }
}

pub fn fit_mean(train: &DataTable, method: MeanMethod) -> Result<MeanModel, CandidateError> {
    let y = train.y().ok_or(CandidateError::Unlabeled)?;
    match method {
        MeanMethod::Ols => Ok(MeanModel::Ols {
            model: ols_fit(train.x(), y, 0.0).or_else(|_| ols_fit(train.x(), y, 1e-8))?,
        }),
        MeanMethod::Knn { k } => {
            if k == 0 || train.n_rows() == 0 {
                return Err(CandidateError::InvalidSpec("knn mean needs k ≥ 1 and data".into()));
            }
            Ok(MeanModel::Knn {
                k,
                index: NeighborIndex::new(train.x()),
                y: y.to_vec(),
            })
        }
    }
}

/// Squared residuals of the mean model on a labelled table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSet {
    pub r2: Vec<f64>,
    pub mean_model: MeanModel,
}

pub fn residuals(train: &DataTable, m: &MeanModel) -> Result<ResidualSet, CandidateError> {
    let y = train.y().ok_or(CandidateError::Unlabeled)?;
    let pred = m.predict(train.x())?;
    Ok(ResidualSet {
        r2: y.iter().zip(&pred).map(|(a, b)| (a - b).powi(2)).collect(),
        mean_model: m.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandidateSpec {
    ConstantOne,
    /// τ-quantile of `r²` over the `k` nearest training rows.
    KnnQuantile { k: usize, tau: f64 },
    /// Nadaraya–Watson estimate of `E[r² | x]`, Gaussian kernel, bandwidth in
    /// standardized covariate units.
    KernelVariance { bandwidth: f64 },
    /// Linear τ-quantile regression of `r²`, negative predictions clamped to 0.
    LinearQuantileSq { tau: f64 },
    /// τ-quantile of `r²` within equal-frequency bins of the first covariate.
    BinnedQuantile { bins: usize, tau: f64 },
}

impl CandidateSpec {
    pub fn validate(&self) -> Result<(), CandidateError> {
        let tau_ok = |t: f64| t > 0.0 && t < 1.0;
        let bad = |m: String| Err(CandidateError::InvalidSpec(m));
        match *self {
            CandidateSpec::ConstantOne => Ok(()),
            CandidateSpec::KnnQuantile { k, tau } => {
                if k == 0 {
                    bad("knn_quantile needs k ≥ 1".into())
                } else if !tau_ok(tau) {
                    bad(format!("knn_quantile tau {tau} outside (0, 1)"))
                } else {
                    Ok(())
                }
            }
            CandidateSpec::KernelVariance { bandwidth } => {
                if bandwidth > 0.0 && bandwidth.is_finite() {
                    Ok(())
                } else {
                    bad(format!("kernel bandwidth {bandwidth} must be positive"))
                }
            }
            CandidateSpec::LinearQuantileSq { tau } => {
                if tau_ok(tau) {
                    Ok(())
                } else {
                    bad(format!("linear_quantile_sq tau {tau} outside (0, 1)"))
                }
            }
            CandidateSpec::BinnedQuantile { bins, tau } => {
                if bins == 0 {
                    bad("binned_quantile needs bins ≥ 1".into())
                } else if !tau_ok(tau) {
                    bad(format!("binned_quantile tau {tau} outside (0, 1)"))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Default bank: two local quantile levels, a binned quantile, a linear
/// quantile fit, a kernel second-moment smoother and the constant.
pub fn default_specs() -> Vec<CandidateSpec> {
    vec![
        CandidateSpec::KnnQuantile { k: 50, tau: 0.85 },
        CandidateSpec::KnnQuantile { k: 50, tau: 0.95 },
        CandidateSpec::BinnedQuantile { bins: 10, tau: 0.9 },
        CandidateSpec::LinearQuantileSq { tau: 0.9 },
        CandidateSpec::KernelVariance { bandwidth: 0.25 },
        CandidateSpec::ConstantOne,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedCandidate {
    ConstantOne,
    KnnQuantile { k: usize, tau: f64, index: NeighborIndex, r2: Vec<f64> },
    KernelVariance { bandwidth: f64, index: NeighborIndex, r2: Vec<f64> },
    LinearQuantileSq { model: LinearModel<f64> },
    BinnedQuantile { edges: Vec<f64>, values: Vec<f64> },
}

fn quantile(v: &[f64], tau: f64) -> f64 {
    empirical_quantile(v, tau).expect("non-empty")
}

impl FittedCandidate {
    pub fn fit(
        spec: &CandidateSpec,
        x: &Matrix<f64>,
        r2: &[f64],
        position: usize,
    ) -> Result<Self, CandidateError> {
        spec.validate()?;
        if x.nrows() != r2.len() || x.nrows() == 0 {
            return Err(CandidateError::DimensionMismatch(format!(
                "{} covariate rows for {} residuals",
                x.nrows(),
                r2.len()
            )));
        }
        Ok(match *spec {
            CandidateSpec::ConstantOne => FittedCandidate::ConstantOne,
            CandidateSpec::KnnQuantile { k, tau } => FittedCandidate::KnnQuantile {
                k,
                tau,
                index: NeighborIndex::new(x),
                r2: r2.to_vec(),
            },
            CandidateSpec::KernelVariance { bandwidth } => FittedCandidate::KernelVariance {
                bandwidth,
                index: NeighborIndex::new(x),
                r2: r2.to_vec(),
            },
            CandidateSpec::LinearQuantileSq { tau } => FittedCandidate::LinearQuantileSq {
                model: quantile_reg_fit(x, r2, tau)?,
            },
            CandidateSpec::BinnedQuantile { bins, tau } => {
                let n = x.nrows();
                let mut first: Vec<f64> = x.column(0);
                first.sort_by(f64::total_cmp);
                let edges: Vec<f64> = (1..bins).map(|b| first[(b * n / bins).min(n - 1)]).collect();
                let mut members = vec![Vec::new(); bins];
                for (r, &v) in x.rows_iter().zip(r2) {
                    members[bin_of(&edges, r[0])].push(v);
                }
                let mut values = Vec::with_capacity(bins);
                for (bin, m) in members.iter().enumerate() {
                    if m.is_empty() {
                        return Err(CandidateError::EmptyBin {
                            candidate: position,
                            bin,
                        });
                    }
                    values.push(quantile(m, tau));
                }
                FittedCandidate::BinnedQuantile { edges, values }
            }
        })
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            FittedCandidate::ConstantOne | FittedCandidate::BinnedQuantile { .. } => None,
            FittedCandidate::KnnQuantile { index, .. } | FittedCandidate::KernelVariance { index, .. } => {
                Some(index.points.ncols())
            }
            FittedCandidate::LinearQuantileSq { model } => Some(model.dim()),
        }
    }

    /// Nonnegative evaluations at every row of `x`.
    pub fn eval(&self, x: &Matrix<f64>) -> Vec<f64> {
        match self {
            FittedCandidate::ConstantOne => vec![1.0; x.nrows()],
            FittedCandidate::KnnQuantile { k, tau, index, r2 } => index
                .nearest(x, *k)
                .into_iter()
                .map(|nb| {
                    let vals: Vec<f64> = nb.iter().map(|&i| r2[i]).collect();
                    quantile(&vals, *tau)
                })
                .collect(),
            FittedCandidate::KernelVariance { bandwidth, index, r2 } => {
                let q = index.standardizer.apply(x);
                let scale = 2.0 * bandwidth * bandwidth;
                q.rows_iter()
                    .map(|row| {
                        let d = index.sq_dists(row);
                        // Shift by the nearest distance so far queries do not
                        // underflow to 0/0.
                        let dmin = d.iter().copied().fold(f64::INFINITY, f64::min);
                        let (mut num, mut den) = (0.0, 0.0);
                        for (di, ri) in d.iter().zip(r2) {
                            let w = (-(di - dmin) / scale).exp();
                            num += w * ri;
                            den += w;
                        }
                        num / den
                    })
                    .collect()
            }
            FittedCandidate::LinearQuantileSq { model } => {
                model.predict(x).into_iter().map(|v| v.max(0.0)).collect()
            }
            FittedCandidate::BinnedQuantile { edges, values } => {
                x.rows_iter().map(|r| values[bin_of(edges, r[0])]).collect()
            }
        }
    }
}

/// Bin index: the number of edges at or below `v`.
fn bin_of(edges: &[f64], v: f64) -> usize {
    edges.partition_point(|&e| e <= v)
}

/// Fitted candidates with their evaluations on the training and target
/// covariates (`n × K`, one column per spec).
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateBank {
    pub specs: Vec<CandidateSpec>,
    pub fitted: Vec<FittedCandidate>,
    pub phi_source: Matrix<f64>,
    pub phi_target: Matrix<f64>,
}

/// Evaluates fitted candidates column by column.
pub fn eval_bank(fitted: &[FittedCandidate], x: &Matrix<f64>) -> Matrix<f64> {
    let mut out = Matrix::zeros(x.nrows(), fitted.len());
    for (j, f) in fitted.iter().enumerate() {
        for (i, v) in f.eval(x).into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    out
}

pub fn build_bank(
    train: &DataTable,
    r: &ResidualSet,
    target_x: &Matrix<f64>,
    specs: &[CandidateSpec],
) -> Result<CandidateBank, CandidateError> {
    if specs.is_empty() {
        return Err(CandidateError::InvalidSpec("empty candidate list".into()));
    }
    if !train.is_labeled() {
        return Err(CandidateError::Unlabeled);
    }
    if target_x.ncols() != train.dim() {
        return Err(CandidateError::DimensionMismatch(format!(
            "target has {} covariates, training data {}",
            target_x.ncols(),
            train.dim()
        )));
    }
    let fitted = specs
        .iter()
        .enumerate()
        .map(|(j, s)| FittedCandidate::fit(s, train.x(), &r.r2, j))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CandidateBank {
        specs: specs.to_vec(),
        phi_source: eval_bank(&fitted, train.x()),
        phi_target: eval_bank(&fitted, target_x),
        fitted,
    })
}

impl CandidateBank {
    pub fn eval(&self, x: &Matrix<f64>) -> Matrix<f64> {
        eval_bank(&self.fitted, x)
    }
}
