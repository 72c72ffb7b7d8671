//! Weighted split-conformal baselines: variance-adjusted scores (WVAC) and
//! quantile-adjusted scores (WQC).

use serde::{Deserialize, Serialize};

use crate::aggregate::IntervalBatch;
use crate::candidates::{CandidateError, CandidateSpec, FittedCandidate};
use crate::dataset::DataTable;
use crate::densratio::DensityRatioModel;
use crate::linalg::Matrix;
use crate::numerics::{ols_fit, quantile_reg_fit, weighted_quantile, LinearModel, NumericsError};

/// Calibration weights and the test-point weight `ŵ(x)`; `None` means `ŵ ≡ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalWeights {
    pub ratio: Option<DensityRatioModel>,
}

impl ConformalWeights {
    pub fn eval(&self, x: &Matrix<f64>) -> Result<Vec<f64>, NumericsError> {
        match &self.ratio {
            Some(r) => r.eval(x),
            None => Ok(vec![1.0; x.nrows()]),
        }
    }
}

/// Weighted `(1−α)`-quantile of the calibration scores with an extra atom
/// of mass `w_test` at `+∞`.
pub fn conformal_quantile(scores: &[f64], cal_w: &[f64], w_test: f64, alpha_level: f64) -> Result<f64, NumericsError> {
    let mut v = Vec::with_capacity(scores.len() + 1);
    v.extend_from_slice(scores);
    v.push(f64::INFINITY);
    let mut w = Vec::with_capacity(cal_w.len() + 1);
    w.extend_from_slice(cal_w);
    w.push(w_test);
    weighted_quantile(&v, &w, 1.0 - alpha_level)
}

fn labels(t: &DataTable) -> Result<&[f64], CandidateError> {
    t.y().ok_or(CandidateError::Unlabeled)
}

/// Normal-reference bandwidth `(4/(d+2))^{1/(d+4)} n^{−1/(d+4)}` in
/// standardized units.
pub fn normal_reference_bandwidth(n: usize, d: usize) -> f64 {
    let e = 1.0 / (d as f64 + 4.0);
    (4.0 / (d as f64 + 2.0)).powf(e) * (n as f64).powf(-e)
}

fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WvacOptions {
    /// Kernel bandwidth for σ̂ in standardized units; normal-reference rule
    /// when absent.
    pub bandwidth: Option<f64>,
    /// Floor on σ̂; defaults to `1e-6` times the training response SD.
    pub sigma_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WvacModel {
    pub mean: LinearModel<f64>,
    /// Kernel smoother of `|y − μ̂(x)|`.
    pub scale: FittedCandidate,
    pub sigma_min: f64,
    pub scores: Vec<f64>,
    pub cal_weights: Vec<f64>,
    pub weights: ConformalWeights,
}

impl WvacModel {
    pub fn sigma(&self, x: &Matrix<f64>) -> Vec<f64> {
        self.scale.eval(x).into_iter().map(|s| s.max(self.sigma_min)).collect()
    }
}

pub fn fit_wvac(
    train: &DataTable,
    cal: &DataTable,
    ratio: Option<&DensityRatioModel>,
    opts: &WvacOptions,
) -> Result<WvacModel, CandidateError> {
    let y = labels(train)?;
    let yc = labels(cal)?;
    if cal.n_rows() == 0 {
        return Err(CandidateError::InvalidSpec("empty calibration block".into()));
    }
    let mean = ols_fit(train.x(), y, 0.0).or_else(|_| ols_fit(train.x(), y, 1e-8))?;
    let abs_res: Vec<f64> = mean.predict(train.x()).iter().zip(y).map(|(m, v)| (v - m).abs()).collect();
    let bandwidth = opts
        .bandwidth
        .unwrap_or_else(|| normal_reference_bandwidth(train.n_rows(), train.dim()));
    let scale = FittedCandidate::fit(&CandidateSpec::KernelVariance { bandwidth }, train.x(), &abs_res, 0)?;
    let sigma_min = opts.sigma_min.unwrap_or_else(|| {
        let s = 1e-6 * sample_sd(y);
        if s > 0.0 {
            s
        } else {
            1e-12
        }
    });
    if !(sigma_min > 0.0) {
        return Err(CandidateError::InvalidSpec("sigma_min must be positive".into()));
    }
    let weights = ConformalWeights { ratio: ratio.cloned() };
    let mut model = WvacModel {
        mean,
        scale,
        sigma_min,
        scores: Vec::new(),
        cal_weights: weights.eval(cal.x())?,
        weights,
    };
    let mu = model.mean.predict(cal.x());
    let sig = model.sigma(cal.x());
    model.scores = yc.iter().zip(&mu).zip(&sig).map(|((v, m), s)| (v - m).abs() / s).collect();
    Ok(model)
}

pub fn predict_wvac(m: &WvacModel, x: &Matrix<f64>, alpha_level: f64) -> Result<IntervalBatch, NumericsError> {
    let mu = m.mean.predict(x);
    let sig = m.sigma(x);
    let wx = m.weights.eval(x)?;
    let mut half = Vec::with_capacity(x.nrows());
    for i in 0..x.nrows() {
        let eta = conformal_quantile(&m.scores, &m.cal_weights, wx[i], alpha_level)?;
        half.push(sig[i] * eta);
    }
    Ok(IntervalBatch::symmetric(mu, &half))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WqcModel {
    pub lower: LinearModel<f64>,
    pub upper: LinearModel<f64>,
    pub scores: Vec<f64>,
    pub cal_weights: Vec<f64>,
    pub weights: ConformalWeights,
}

impl WqcModel {
    /// `(q̂_lo, q̂_hi)` with crossing predictions swapped.
    pub fn bands(&self, x: &Matrix<f64>) -> (Vec<f64>, Vec<f64>) {
        let lo = self.lower.predict(x);
        let hi = self.upper.predict(x);
        lo.into_iter().zip(hi).map(|(a, b)| if a <= b { (a, b) } else { (b, a) }).unzip()
    }
}

/// Quantile models at `α/2` and `1 − α/2` on `train`, scores on `cal`.
pub fn fit_wqc(
    train: &DataTable,
    cal: &DataTable,
    ratio: Option<&DensityRatioModel>,
    alpha_level: f64,
) -> Result<WqcModel, CandidateError> {
    let y = labels(train)?;
    let yc = labels(cal)?;
    if !(alpha_level > 0.0 && alpha_level < 1.0) {
        return Err(CandidateError::InvalidSpec(format!("alpha level {alpha_level} outside (0, 1)")));
    }
    let lower = quantile_reg_fit(train.x(), y, alpha_level / 2.0)?;
    let upper = quantile_reg_fit(train.x(), y, 1.0 - alpha_level / 2.0)?;
    let weights = ConformalWeights { ratio: ratio.cloned() };
    let mut model = WqcModel {
        lower,
        upper,
        scores: Vec::new(),
        cal_weights: weights.eval(cal.x())?,
        weights,
    };
    let (lo, hi) = model.bands(cal.x());
    model.scores = yc.iter().zip(lo.iter().zip(&hi)).map(|(v, (l, h))| (l - v).max(v - h)).collect();
    Ok(model)
}

pub fn predict_wqc(m: &WqcModel, x: &Matrix<f64>, alpha_level: f64) -> Result<IntervalBatch, NumericsError> {
    let (lo, hi) = m.bands(x);
    let wx = m.weights.eval(x)?;
    let mut out = IntervalBatch::default();
    for i in 0..x.nrows() {
        let eta = conformal_quantile(&m.scores, &m.cal_weights, wx[i], alpha_level)?;
        let mid = 0.5 * (lo[i] + hi[i]);
        if eta.is_infinite() {
            out.lower.push(f64::NEG_INFINITY);
            out.upper.push(f64::INFINITY);
            out.infinite.push(true);
        } else {
            // A negative η can shrink the band past its midpoint.
            out.lower.push((lo[i] - eta).min(mid));
            out.upper.push((hi[i] + eta).max(mid));
            out.infinite.push(false);
        }
        out.center.push(mid);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_equal_scores_at_twenty_percent_take_the_largest() {
        let eta = conformal_quantile(&[0.3, 0.1, 0.4, 0.2], &[1.0; 4], 1.0, 0.2).unwrap();
        assert_eq!(eta, 0.4);
    }

    #[test]
    fn dominant_test_weight_is_infinite() {
        let eta = conformal_quantile(&[0.3, 0.1], &[1.0, 1.0], 1e3, 0.1).unwrap();
        assert!(eta.is_infinite());
    }

    #[test]
    fn alpha_near_one_takes_smallest_score() {
        let eta = conformal_quantile(&[0.3, 0.1, 0.2], &[1.0; 3], 1.0, 0.999).unwrap();
        assert_eq!(eta, 0.1);
    }

    #[test]
    fn bandwidth_rule_one_dimension() {
        let h = normal_reference_bandwidth(1000, 1);
        assert!((h - (4.0f64 / 3.0).powf(0.2) * 1000f64.powf(-0.2)).abs() < 1e-15);
    }
}
