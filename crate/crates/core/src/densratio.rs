//! Density ratio `ŵ(x) = (n₁/n₂)·p̂(x)/(1 − p̂(x))` from a source-vs-target
//! logistic classifier.

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::numerics::{logistic_fit, sigmoid, LinearModel, LogisticOptions, NumericsError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatioOptions {
    pub ridge: f64,
    pub prob_clip: f64,
    pub ratio_cap: f64,
}

impl Default for RatioOptions {
    fn default() -> Self {
        Self {
            ridge: 1e-6,
            prob_clip: 1e-6,
            ratio_cap: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRatioModel {
    pub classifier: LinearModel<f64>,
    pub n_source: usize,
    pub n_target: usize,
    pub prob_clip: f64,
    pub ratio_cap: f64,
}

/// Fits `P(target | x)` on the pooled covariates, source rows labelled 0 and
/// target rows labelled 1.
pub fn fit_density_ratio(
    source_x: &Matrix<f64>,
    target_x: &Matrix<f64>,
    opts: &RatioOptions,
) -> Result<DensityRatioModel, NumericsError> {
    if source_x.nrows() == 0 || target_x.nrows() == 0 {
        return Err(NumericsError::EmptyInput);
    }
    if !(opts.prob_clip > 0.0 && opts.prob_clip < 0.5) {
        return Err(NumericsError::InvalidArgument(format!(
            "prob_clip {} outside (0, 0.5)",
            opts.prob_clip
        )));
    }
    if !(opts.ratio_cap > 0.0) {
        return Err(NumericsError::InvalidArgument("ratio_cap must be positive".into()));
    }
    let pooled = source_x.vstack(target_x).ok_or_else(|| {
        NumericsError::DimensionMismatch(format!(
            "source has {} covariates, target {}",
            source_x.ncols(),
            target_x.ncols()
        ))
    })?;
    let labels: Vec<f64> = std::iter::repeat(0.0)
        .take(source_x.nrows())
        .chain(std::iter::repeat(1.0).take(target_x.nrows()))
        .collect();
    let fit = logistic_fit(
        &pooled,
        &labels,
        &LogisticOptions {
            ridge: opts.ridge,
            ..Default::default()
        },
    )?;
    Ok(DensityRatioModel {
        classifier: fit.model,
        n_source: source_x.nrows(),
        n_target: target_x.nrows(),
        prob_clip: opts.prob_clip,
        ratio_cap: opts.ratio_cap,
    })
}

impl DensityRatioModel {
    pub fn dim(&self) -> usize {
        self.classifier.dim()
    }

    /// Ratio at a single row given its classifier log-odds.
    pub fn ratio_from_score(&self, score: f64) -> f64 {
        let k = self.prob_clip;
        let p = sigmoid(score).clamp(k, 1.0 - k);
        let r = (self.n_source as f64 / self.n_target as f64) * p / (1.0 - p);
        r.min(self.ratio_cap)
    }

    pub fn eval(&self, x: &Matrix<f64>) -> Result<Vec<f64>, NumericsError> {
        if x.ncols() != self.dim() {
            return Err(NumericsError::DimensionMismatch(format!(
                "ratio model expects {} covariates, got {}",
                self.dim(),
                x.ncols()
            )));
        }
        Ok(self.classifier.scores(x).into_iter().map(|s| self.ratio_from_score(s)).collect())
    }
}
