use std::path::Path;

use serde::{Deserialize, Serialize};

use super::shape::ShapeModel;
use super::shrink::ShrinkResult;
use super::AggregateError;
use crate::candidates::{eval_bank, CandidateSpec, FittedCandidate, MeanModel};
use crate::dataset::DataError;
use crate::densratio::DensityRatioModel;
use crate::linalg::Matrix;
use crate::transport::AffineMap;

/// How target covariates relate to the source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Adapter {
    /// Covariate shift with an estimated density ratio.
    Ratio { model: DensityRatioModel },
    /// Domain shift through an affine transport map.
    Map { map: AffineMap<f64> },
    /// Covariate shift with externally supplied weights (nothing to store).
    None,
}

/// A fitted interval predictor `m̂(x) ± √(λ̂·g(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiModel {
    pub alpha_level: f64,
    pub shape: ShapeModel<f64>,
    pub specs: Vec<CandidateSpec>,
    pub candidates: Vec<FittedCandidate>,
    pub mean_model: MeanModel,
    pub shrink: ShrinkResult<f64>,
    pub adapter: Adapter,
    /// Lower bound applied to the shape before the square root (covariate shift).
    pub floor: f64,
    /// Additive δ inside the square root (transport).
    pub alg2_delta: f64,
    /// Miscoverage of the shape block at the final λ̂, when recorded.
    pub heldout_violation: Option<f64>,
}

impl PiModel {
    pub fn dim(&self) -> usize {
        self.mean_model.dim()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Per-point intervals. An infinite interval has `lower = −∞`, `upper = +∞`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalBatch {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub center: Vec<f64>,
    pub infinite: Vec<bool>,
}

impl IntervalBatch {
    /// Symmetric intervals; a non-finite half-width marks the row infinite.
    pub fn symmetric(center: Vec<f64>, half_width: &[f64]) -> Self {
        let mut lower = Vec::with_capacity(center.len());
        let mut upper = Vec::with_capacity(center.len());
        let mut infinite = Vec::with_capacity(center.len());
        for (&c, &h) in center.iter().zip(half_width) {
            if h.is_finite() {
                lower.push(c - h);
                upper.push(c + h);
                infinite.push(false);
            } else {
                lower.push(f64::NEG_INFINITY);
                upper.push(f64::INFINITY);
                infinite.push(true);
            }
        }
        Self {
            lower,
            upper,
            center,
            infinite,
        }
    }

    pub fn len(&self) -> usize {
        self.center.len()
    }

    pub fn is_empty(&self) -> bool {
        self.center.is_empty()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.upper.iter().zip(&self.lower).map(|(u, l)| u - l).collect()
    }

    /// Columns `lower,center,upper,infinite`.
    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["lower", "center", "upper", "infinite"])?;
        for i in 0..self.len() {
            w.write_record([
                self.lower[i].to_string(),
                self.center[i].to_string(),
                self.upper[i].to_string(),
                (self.infinite[i] as u8).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self, DataError> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DataError::MissingColumn(name.to_string()))
        };
        let (lo, ce, up) = (col("lower")?, col("center")?, col("upper")?);
        let inf = col("infinite").ok();
        let mut out = IntervalBatch::default();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let get = |j: usize| -> Result<f64, DataError> {
                let cell = rec.get(j).unwrap_or("");
                cell.trim().parse().map_err(|_| DataError::Parse {
                    row: i + 1,
                    column: headers[j].clone(),
                    value: cell.to_string(),
                })
            };
            let (l, c, u) = (get(lo)?, get(ce)?, get(up)?);
            let flagged = match inf {
                Some(j) => get(j)? != 0.0,
                None => false,
            };
            out.lower.push(l);
            out.center.push(c);
            out.upper.push(u);
            out.infinite.push(flagged || !(l.is_finite() && u.is_finite()));
        }
        Ok(out)
    }
}

/// Fitted shape `Σ_j α_j f_j(x)` at every row.
pub fn shape_at(m: &PiModel, x: &Matrix<f64>) -> Vec<f64> {
    m.shape.eval(&eval_bank(&m.candidates, x))
}

pub fn predict_interval(m: &PiModel, x: &Matrix<f64>) -> Result<IntervalBatch, AggregateError> {
    if x.ncols() != m.dim() {
        return Err(AggregateError::DimensionMismatch(format!(
            "model expects {} covariates, got {}",
            m.dim(),
            x.ncols()
        )));
    }
    let lam = m.shrink.lambda_hat;
    let (center, half): (Vec<f64>, Vec<f64>) = match &m.adapter {
        Adapter::Map { map } => {
            let z = map.apply(x)?;
            let center = m.mean_model.predict(&z)?;
            let half = shape_at(m, &z).into_iter().map(|f| (lam * (f + m.alg2_delta)).sqrt()).collect();
            (center, half)
        }
        Adapter::Ratio { .. } | Adapter::None => {
            let center = m.mean_model.predict(x)?;
            let half = shape_at(m, x).into_iter().map(|f| (lam * f.max(m.floor)).sqrt()).collect();
            (center, half)
        }
    };
    Ok(IntervalBatch::symmetric(center, &half))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub alpha_level: f64,
    pub lambda_hat: f64,
    pub lambda_exceeds_one: bool,
    pub warning: Option<String>,
    pub calibration_violation: f64,
    pub heldout_violation: Option<f64>,
}

pub fn diagnose(m: &PiModel) -> Diagnostics {
    let lam = m.shrink.lambda_hat;
    let exceeds = lam > 1.0;
    Diagnostics {
        alpha_level: m.alpha_level,
        lambda_hat: lam,
        lambda_exceeds_one: exceeds,
        warning: exceeds.then(|| {
            format!("shrink level {lam} exceeds 1: the shape under-covers the calibration block")
        }),
        calibration_violation: m.shrink.achieved_violation,
        heldout_violation: m.heldout_violation,
    }
}
