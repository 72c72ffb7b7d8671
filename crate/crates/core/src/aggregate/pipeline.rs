use serde::{Deserialize, Serialize};

use super::model::{Adapter, PiModel};
use super::shape::{fit_shape_cov_shift, fit_shape_source, ShapeMode, ShapeOptions};
use super::shrink::{shrink_cov_shift, shrink_source};
use super::AggregateError;
use crate::candidates::{
    default_specs, eval_bank, fit_mean, residuals, CandidateSpec, FittedCandidate, MeanMethod,
};
use crate::dataset::{split, DataTable, SplitSpec};
use crate::densratio::{fit_density_ratio, RatioOptions};
use crate::linalg::Matrix;
use crate::numerics::empirical_quantile;
use crate::transport::{fit_affine_transport, AffineMap, TransportMode};

/// The three source blocks: candidates, mean model and ratio on `d1`, shape
/// on `d21`, shrinkage on `d22`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceBlocks {
    pub d1: DataTable,
    pub d21: DataTable,
    pub d22: DataTable,
}

pub fn split_source(source: &DataTable, fractions: [f64; 3], seed: u64) -> Result<SourceBlocks, AggregateError> {
    if !source.is_labeled() {
        return Err(AggregateError::InvalidArgument("source table needs labels".into()));
    }
    let spec = SplitSpec::new(fractions.to_vec(), seed)?;
    let mut parts = split(source, &spec)?.into_iter();
    Ok(SourceBlocks {
        d1: parts.next().unwrap(),
        d21: parts.next().unwrap(),
        d22: parts.next().unwrap(),
    })
}

/// Where the covariate-shift weights come from.
pub enum Weighting<'a> {
    /// Logistic density ratio fitted on `d1` against the target covariates.
    Estimate(RatioOptions),
    /// A known ratio function.
    Known(&'a (dyn Fn(&Matrix<f64>) -> Vec<f64> + Sync)),
    /// `ŵ ≡ 1` (no shift).
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Alg1Config {
    pub candidates: Vec<CandidateSpec>,
    pub mean: MeanMethod,
    pub mode: ShapeMode,
    /// Hinge δ; defaults to a tenth of the 0.9-quantile of the shape-block `r²`.
    pub delta: Option<f64>,
    pub epsilon: f64,
    pub support_threshold: f64,
    /// Defaults to `1e-9 · max(max r²_cal, 1)`.
    pub floor: Option<f64>,
    /// Divide the calibration weights by their sum rather than by `n`.
    pub normalize_weights: bool,
    pub feas_tol: f64,
}

impl Default for Alg1Config {
    fn default() -> Self {
        Self {
            candidates: default_specs(),
            mean: MeanMethod::Ols,
            mode: ShapeMode::CovShiftExact,
            delta: None,
            epsilon: 0.01,
            support_threshold: 0.0,
            floor: None,
            normalize_weights: false,
            feas_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Alg2Config {
    pub candidates: Vec<CandidateSpec>,
    pub mean: MeanMethod,
    pub transport: TransportMode,
    pub cov_ridge: f64,
    /// Additive δ; defaults to a hundredth of the 0.9-quantile of the
    /// shape-block `r²`.
    pub delta: Option<f64>,
    pub feas_tol: f64,
}

impl Default for Alg2Config {
    fn default() -> Self {
        Self {
            candidates: default_specs(),
            mean: MeanMethod::Ols,
            transport: TransportMode::GaussianOt,
            cov_ridge: 0.0,
            delta: None,
            feas_tol: 1e-9,
        }
    }
}

/// A fitted model plus the shape-block quantities it was fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOutput {
    pub model: PiModel,
    pub shape_r2: Vec<f64>,
    pub shape_weights: Vec<f64>,
    pub shape_f_hat: Vec<f64>,
}

fn check_alpha(a: f64) -> Result<(), AggregateError> {
    if a > 0.0 && a < 1.0 {
        Ok(())
    } else {
        Err(AggregateError::InvalidArgument(format!("alpha level {a} outside (0, 1)")))
    }
}

fn fit_candidates(d1: &DataTable, r2: &[f64], specs: &[CandidateSpec]) -> Result<Vec<FittedCandidate>, AggregateError> {
    if specs.is_empty() {
        return Err(AggregateError::InvalidArgument("empty candidate list".into()));
    }
    Ok(specs
        .iter()
        .enumerate()
        .map(|(j, s)| FittedCandidate::fit(s, d1.x(), r2, j))
        .collect::<Result<Vec<_>, _>>()?)
}

fn q90(v: &[f64]) -> f64 {
    empirical_quantile(v, 0.9).unwrap_or(0.0)
}

/// Covariate-shift pipeline.
pub fn fit_alg1(
    blocks: &SourceBlocks,
    target_x: &Matrix<f64>,
    alpha_level: f64,
    cfg: &Alg1Config,
    weighting: &Weighting,
) -> Result<FitOutput, AggregateError> {
    check_alpha(alpha_level)?;
    if target_x.ncols() != blocks.d1.dim() {
        return Err(AggregateError::DimensionMismatch(format!(
            "target has {} covariates, source {}",
            target_x.ncols(),
            blocks.d1.dim()
        )));
    }
    let mean_model = fit_mean(&blocks.d1, cfg.mean)?;
    let r1 = residuals(&blocks.d1, &mean_model)?;
    let candidates = fit_candidates(&blocks.d1, &r1.r2, &cfg.candidates)?;

    let (adapter, w21, w22) = match weighting {
        Weighting::Estimate(opts) => {
            let ratio = fit_density_ratio(blocks.d1.x(), target_x, opts)?;
            let w21 = ratio.eval(blocks.d21.x())?;
            let w22 = ratio.eval(blocks.d22.x())?;
            (Adapter::Ratio { model: ratio }, w21, w22)
        }
        Weighting::Known(f) => (Adapter::None, f(blocks.d21.x()), f(blocks.d22.x())),
        Weighting::Uniform => (
            Adapter::None,
            vec![1.0; blocks.d21.n_rows()],
            vec![1.0; blocks.d22.n_rows()],
        ),
    };

    let r21 = residuals(&blocks.d21, &mean_model)?.r2;
    let phi21 = eval_bank(&candidates, blocks.d21.x());
    let phi_t = eval_bank(&candidates, target_x);
    let opts = match cfg.mode {
        ShapeMode::CovShiftExact => ShapeOptions {
            support_threshold: cfg.support_threshold,
            feas_tol: cfg.feas_tol,
            ..ShapeOptions::exact()
        },
        ShapeMode::CovShiftHinge => {
            let delta = cfg.delta.unwrap_or_else(|| {
                let d = 0.1 * q90(&r21);
                if d > 0.0 {
                    d
                } else {
                    1e-9
                }
            });
            ShapeOptions {
                support_threshold: cfg.support_threshold,
                feas_tol: cfg.feas_tol,
                ..ShapeOptions::hinge(delta, cfg.epsilon)
            }
        }
        ShapeMode::SourceExact => {
            return Err(AggregateError::InvalidArgument(
                "source_exact belongs to the transport pipeline".into(),
            ))
        }
    };
    let shape = fit_shape_cov_shift(&phi21, &phi_t, &r21, &w21, &opts)?;

    let r22 = residuals(&blocks.d22, &mean_model)?.r2;
    let f22 = shape.eval(&eval_bank(&candidates, blocks.d22.x()));
    let floor = cfg
        .floor
        .unwrap_or_else(|| 1e-9 * r22.iter().copied().fold(1.0, f64::max));
    let shrink = shrink_cov_shift(&f22, &r22, &w22, alpha_level, floor, cfg.normalize_weights)?;

    let f21 = shape.eval(&phi21);
    let lam = shrink.lambda_hat;
    let held = r21
        .iter()
        .zip(&f21)
        .zip(&w21)
        .filter(|((&r, &f), _)| r > lam * f.max(floor))
        .map(|(_, &w)| w)
        .sum::<f64>()
        / r21.len() as f64;

    Ok(FitOutput {
        model: PiModel {
            alpha_level,
            shape,
            specs: cfg.candidates.clone(),
            candidates,
            mean_model,
            shrink,
            adapter,
            floor,
            alg2_delta: 0.0,
            heldout_violation: Some(held),
        },
        shape_r2: r21,
        shape_weights: w21,
        shape_f_hat: f21,
    })
}

/// Transport pipeline. `map` overrides the fitted affine map.
pub fn fit_alg2(
    blocks: &SourceBlocks,
    target_x: &Matrix<f64>,
    alpha_level: f64,
    cfg: &Alg2Config,
    map: Option<&AffineMap<f64>>,
) -> Result<FitOutput, AggregateError> {
    check_alpha(alpha_level)?;
    let map = match map {
        Some(m) => m.clone(),
        None => {
            let source_x = blocks
                .d1
                .x()
                .vstack(blocks.d21.x())
                .and_then(|m| m.vstack(blocks.d22.x()))
                .ok_or_else(|| AggregateError::DimensionMismatch("source blocks disagree".into()))?;
            fit_affine_transport(target_x, &source_x, cfg.transport, cfg.cov_ridge)?
        }
    };
    if map.dim() != blocks.d1.dim() {
        return Err(AggregateError::DimensionMismatch(format!(
            "map acts on {} covariates, source has {}",
            map.dim(),
            blocks.d1.dim()
        )));
    }
    let mean_model = fit_mean(&blocks.d1, cfg.mean)?;
    let r1 = residuals(&blocks.d1, &mean_model)?;
    let candidates = fit_candidates(&blocks.d1, &r1.r2, &cfg.candidates)?;

    let r21 = residuals(&blocks.d21, &mean_model)?.r2;
    let phi21 = eval_bank(&candidates, blocks.d21.x());
    let shape = fit_shape_source(&phi21, &r21, cfg.feas_tol)?;

    let delta = cfg.delta.unwrap_or_else(|| 0.01 * q90(&r21));
    let r22 = residuals(&blocks.d22, &mean_model)?.r2;
    let f22 = shape.eval(&eval_bank(&candidates, blocks.d22.x()));
    let shrink = shrink_source(&f22, &r22, alpha_level, delta)?;

    let f21 = shape.eval(&phi21);
    let lam = shrink.lambda_hat;
    let held = r21.iter().zip(&f21).filter(|(&r, &f)| r > lam * (f + delta)).count() as f64 / r21.len() as f64;

    let n21 = r21.len();
    Ok(FitOutput {
        model: PiModel {
            alpha_level,
            shape,
            specs: cfg.candidates.clone(),
            candidates,
            mean_model,
            shrink,
            adapter: Adapter::Map { map },
            floor: 0.0,
            alg2_delta: delta,
            heldout_violation: Some(held),
        },
        shape_r2: r21,
        shape_weights: vec![1.0; n21],
        shape_f_hat: f21,
    })
}
