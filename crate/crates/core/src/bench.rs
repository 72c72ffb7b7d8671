//! Monte-Carlo scenario runner, coverage metrics and report files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{
    fit_alg1, fit_alg2, predict_interval, split_source, Alg1Config, Alg2Config, FitOutput, IntervalBatch,
    SourceBlocks, Weighting,
};
use crate::conformal::{fit_wqc, fit_wvac, predict_wqc, predict_wvac, WvacOptions};
use crate::dataset::{
    affine_shift, gen_gaussian_sim, gen_hetero_sim, load_csv, logistic_resample, replication_seed, split,
    tilt_resample, DataError, DataTable, SplitSpec,
};
use crate::densratio::{fit_density_ratio, DensityRatioModel, RatioOptions};
use crate::linalg::Matrix;
use crate::numerics::sigmoid;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{intervals} intervals for {labels} labels")]
    LengthMismatch { intervals: usize, labels: usize },
    #[error("no intervals to score")]
    Empty,
    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn config_err(path: impl Into<String>, message: impl Into<String>) -> BenchError {
    BenchError::Config {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageWidth {
    pub coverage: f64,
    /// Mean width over the finite intervals; NaN when none is finite.
    pub avg_width: f64,
    pub n_infinite: usize,
}

/// Empirical coverage and mean width. Infinite intervals count as covered
/// and are left out of the width mean.
pub fn coverage_and_width(intervals: &IntervalBatch, y: &[f64]) -> Result<CoverageWidth, BenchError> {
    if intervals.len() != y.len() {
        return Err(BenchError::LengthMismatch {
            intervals: intervals.len(),
            labels: y.len(),
        });
    }
    if y.is_empty() {
        return Err(BenchError::Empty);
    }
    let mut covered = 0usize;
    let mut n_infinite = 0usize;
    let mut width = 0.0;
    for (i, &v) in y.iter().enumerate() {
        if intervals.infinite[i] {
            n_infinite += 1;
            covered += 1;
            continue;
        }
        if intervals.lower[i] <= v && v <= intervals.upper[i] {
            covered += 1;
        }
        width += intervals.upper[i] - intervals.lower[i];
    }
    let n_finite = y.len() - n_infinite;
    Ok(CoverageWidth {
        coverage: covered as f64 / y.len() as f64,
        avg_width: if n_finite > 0 { width / n_finite as f64 } else { f64::NAN },
        n_infinite,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// One covariate, `Y = √(1 + 25X⁴)·ξ`.
    Hetero1d { n: usize },
    Gaussian {
        n: usize,
        #[serde(default = "default_dim")]
        d: usize,
    },
    Csv {
        path: PathBuf,
        #[serde(default = "default_label")]
        label: String,
    },
}

fn default_dim() -> usize {
    5
}

fn default_label() -> String {
    "y".into()
}

/// How the held-out part becomes the target sample.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShiftSpec {
    #[default]
    None,
    /// Resampling with weights `exp(xᵀβ)`.
    Tilt { beta: Vec<f64> },
    /// Resampling with weights `1/(1 + exp(−xᵀβ))`.
    LogisticTilt { beta: Vec<f64> },
    /// `x ↦ A·x + b`, labels kept.
    Affine { a: Vec<Vec<f64>>, b: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    #[default]
    Estimate,
    /// The population ratio implied by the generator and shift.
    Known,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Alg1Method {
    pub name: Option<String>,
    pub weights: WeightSource,
    pub ratio: RatioOptions,
    pub params: Alg1Config,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Alg2Method {
    pub name: Option<String>,
    pub params: Alg2Config,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WvacMethod {
    pub name: Option<String>,
    pub weights: WeightSource,
    pub ratio: RatioOptions,
    pub params: WvacOptions,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WqcMethod {
    pub name: Option<String>,
    pub weights: WeightSource,
    pub ratio: RatioOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodSpec {
    Alg1(Alg1Method),
    Alg2(Alg2Method),
    Wvac(WvacMethod),
    Wqc(WqcMethod),
}

impl MethodSpec {
    /// Report name; defaults to the method kind.
    pub fn name(&self) -> &str {
        let (name, kind) = match self {
            MethodSpec::Alg1(m) => (&m.name, "alg1"),
            MethodSpec::Alg2(m) => (&m.name, "alg2"),
            MethodSpec::Wvac(m) => (&m.name, "wvac"),
            MethodSpec::Wqc(m) => (&m.name, "wqc"),
        };
        name.as_deref().unwrap_or(kind)
    }

    fn weights(&self) -> Option<WeightSource> {
        match self {
            MethodSpec::Alg1(m) => Some(m.weights),
            MethodSpec::Wvac(m) => Some(m.weights),
            MethodSpec::Wqc(m) => Some(m.weights),
            MethodSpec::Alg2(_) => None,
        }
    }

    /// Parses one method object, keeping field paths under `prefix`.
    fn from_value(mut v: serde_json::Value, prefix: &str) -> Result<Self, BenchError> {
        let obj = v
            .as_object_mut()
            .ok_or_else(|| config_err(prefix, "expected an object"))?;
        let kind = match obj.remove("method") {
            Some(serde_json::Value::String(k)) => k,
            Some(_) => return Err(config_err(format!("{prefix}.method"), "expected a string")),
            None => return Err(config_err(format!("{prefix}.method"), "missing field")),
        };
        fn parse<T: serde::de::DeserializeOwned>(v: serde_json::Value, prefix: &str) -> Result<T, BenchError> {
            serde_path_to_error::deserialize(v).map_err(|e| {
                let inner = e.path().to_string();
                let path = if inner == "." { prefix.to_string() } else { format!("{prefix}.{inner}") };
                config_err(path, e.into_inner().to_string())
            })
        }
        Ok(match kind.as_str() {
            "alg1" => MethodSpec::Alg1(parse(v, prefix)?),
            "alg2" => MethodSpec::Alg2(parse(v, prefix)?),
            "wvac" => MethodSpec::Wvac(parse(v, prefix)?),
            "wqc" => MethodSpec::Wqc(parse(v, prefix)?),
            other => {
                return Err(config_err(
                    format!("{prefix}.method"),
                    format!("unknown method {other:?}, expected alg1, alg2, wvac or wqc"),
                ))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub data: DataSource,
    #[serde(default)]
    pub shift: ShiftSpec,
    #[serde(default)]
    pub methods: Vec<MethodSpec>,
    /// Fraction of each draw held out to build the target sample.
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
    /// Size of a resampled target; defaults to the held-out block size.
    #[serde(default)]
    pub target_size: Option<usize>,
    /// Source blocks for candidates, shape and shrinkage.
    #[serde(default = "default_split")]
    pub split: [f64; 3],
    #[serde(default = "default_alpha")]
    pub alpha_level: f64,
    #[serde(default = "default_reps")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Write measured runtimes; when off `runtime_s` is 0 and reports are
    /// byte-reproducible.
    #[serde(default = "default_true")]
    pub record_runtime: bool,
}

fn default_holdout() -> f64 {
    0.25
}

fn default_split() -> [f64; 3] {
    [0.5, 0.25, 0.25]
}

fn default_alpha() -> f64 {
    0.05
}

fn default_reps() -> usize {
    1
}

fn default_true() -> bool {
    true
}

impl ScenarioConfig {
    pub fn new(data: DataSource, shift: ShiftSpec, methods: Vec<MethodSpec>) -> Self {
        Self {
            data,
            shift,
            methods,
            holdout_fraction: default_holdout(),
            target_size: None,
            split: default_split(),
            alpha_level: default_alpha(),
            replications: default_reps(),
            base_seed: 0,
            output_dir: None,
            record_runtime: true,
        }
    }

    /// Parses a JSON document; errors carry the offending field path.
    pub fn from_json(s: &str) -> Result<Self, BenchError> {
        let mut doc: serde_json::Value = serde_json::from_str(s).map_err(|e| config_err(".", e.to_string()))?;
        let methods = match doc.as_object_mut().and_then(|o| o.remove("methods")) {
            None => Vec::new(),
            Some(serde_json::Value::Array(items)) => items
                .into_iter()
                .enumerate()
                .map(|(i, v)| MethodSpec::from_value(v, &format!("methods[{i}]")))
                .collect::<Result<_, _>>()?,
            Some(_) => return Err(config_err("methods", "expected an array")),
        };
        let mut cfg: ScenarioConfig = serde_path_to_error::deserialize(doc).map_err(|e| {
            let path = e.path().to_string();
            config_err(path, e.into_inner().to_string())
        })?;
        cfg.methods = methods;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, BenchError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    fn validate_static(&self) -> Result<(), BenchError> {
        if self.replications < 1 {
            return Err(config_err("replications", "must be at least 1"));
        }
        if !(self.alpha_level > 0.0 && self.alpha_level < 1.0) {
            return Err(config_err("alpha_level", "must lie in (0, 1)"));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(config_err("holdout_fraction", "must lie in (0, 1)"));
        }
        if self.split.iter().any(|&f| !(f > 0.0)) || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(config_err("split", "fractions must be positive and sum to 1"));
        }
        if self.target_size == Some(0) {
            return Err(config_err("target_size", "must be positive"));
        }
        match &self.data {
            DataSource::Hetero1d { n } | DataSource::Gaussian { n, .. } if *n < 20 => {
                return Err(config_err("data.n", "need at least 20 rows"));
            }
            DataSource::Gaussian { d: 0, .. } => return Err(config_err("data.d", "must be positive")),
            _ => {}
        }
        let mut seen = std::collections::HashSet::new();
        for (i, m) in self.methods.iter().enumerate() {
            if !seen.insert(m.name().to_string()) {
                return Err(config_err(format!("methods[{i}].name"), format!("duplicate method name {:?}", m.name())));
            }
            let specs = match m {
                MethodSpec::Alg1(m) => &m.params.candidates[..],
                MethodSpec::Alg2(m) => &m.params.candidates[..],
                _ => &[],
            };
            for (j, s) in specs.iter().enumerate() {
                s.validate()
                    .map_err(|e| config_err(format!("methods[{i}].params.candidates[{j}]"), e.to_string()))?;
            }
            if matches!(m, MethodSpec::Wvac(_) | MethodSpec::Wqc(_)) && m.weights() == Some(WeightSource::Known) {
                return Err(config_err(
                    format!("methods[{i}].weights"),
                    "known weights are only supported by alg1",
                ));
            }
            if m.weights() == Some(WeightSource::Known) && known_ratio(&self.data, &self.shift).is_none() {
                return Err(config_err(
                    format!("methods[{i}].weights"),
                    "no closed-form ratio for this data source and shift",
                ));
            }
        }
        Ok(())
    }

    fn validate_dim(&self, d: usize) -> Result<(), BenchError> {
        match &self.shift {
            ShiftSpec::Tilt { beta } | ShiftSpec::LogisticTilt { beta } if beta.len() != d => Err(config_err(
                "shift.beta",
                format!("{} entries for {d} covariates", beta.len()),
            )),
            ShiftSpec::Affine { a, b } => {
                if a.len() != d || a.iter().any(|r| r.len() != d) {
                    Err(config_err("shift.a", format!("must be {d}x{d}")))
                } else if b.len() != d {
                    Err(config_err("shift.b", format!("must have {d} entries")))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Target-over-source density ratio for the synthetic generators, when it
/// has a closed form.
pub type KnownRatio = Box<dyn Fn(&Matrix<f64>) -> Vec<f64> + Send + Sync>;

pub fn known_ratio(data: &DataSource, shift: &ShiftSpec) -> Option<KnownRatio> {
    let dot = |beta: &[f64], r: &[f64]| r.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
    match (data, shift) {
        (DataSource::Csv { .. }, _) | (_, ShiftSpec::Affine { .. }) => None,
        (_, ShiftSpec::None) => Some(Box::new(|x: &Matrix<f64>| vec![1.0; x.nrows()])),
        // Both sources are symmetric about 0, so E_S[σ(Xᵀβ)] = 1/2.
        (_, ShiftSpec::LogisticTilt { beta }) => {
            let beta = beta.clone();
            Some(Box::new(move |x: &Matrix<f64>| {
                x.rows_iter().map(|r| 2.0 * sigmoid(dot(&beta, r))).collect()
            }))
        }
        (DataSource::Hetero1d { .. }, ShiftSpec::Tilt { beta }) => {
            let b = beta[0];
            // E[e^{bX}] = sinh(b)/b for X ~ U[−1, 1].
            let norm = if b == 0.0 { 1.0 } else { b.sinh() / b };
            Some(Box::new(move |x: &Matrix<f64>| {
                x.rows_iter().map(|r| (b * r[0]).exp() / norm).collect()
            }))
        }
        (DataSource::Gaussian { .. }, ShiftSpec::Tilt { beta }) => {
            let beta = beta.clone();
            let half_sq = 0.5 * beta.iter().map(|b| b * b).sum::<f64>();
            Some(Box::new(move |x: &Matrix<f64>| {
                x.rows_iter().map(|r| (dot(&beta, r) - half_sq).exp()).collect()
            }))
        }
    }
}

/// Independent sub-stream `k` of a replication seed.
fn stream(seed: u64, k: u64) -> u64 {
    seed.rotate_left(23) ^ k.wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// One replication's data. The target table carries no labels; its
/// responses are kept apart for scoring only.
pub struct ReplicationData {
    pub seed: u64,
    pub blocks: SourceBlocks,
    pub target: DataTable,
    pub target_y: Vec<f64>,
}

/// A validated scenario with its CSV source (if any) loaded once.
pub struct Scenario {
    cfg: ScenarioConfig,
    table: Option<DataTable>,
    known: Option<KnownRatio>,
}

impl Scenario {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, BenchError> {
        cfg.validate_static()?;
        let (table, d) = match &cfg.data {
            DataSource::Csv { path, label } => {
                let t = load_csv(path, Some(label)).map_err(|e| config_err("data.path", e.to_string()))?;
                if t.n_rows() < 20 {
                    return Err(config_err("data.path", "need at least 20 rows"));
                }
                let d = t.dim();
                (Some(t), d)
            }
            DataSource::Hetero1d { .. } => (None, 1),
            DataSource::Gaussian { d, .. } => (None, *d),
        };
        cfg.validate_dim(d)?;
        let known = known_ratio(&cfg.data, &cfg.shift);
        Ok(Self { cfg, table, known })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    /// Draws, splits and shifts the data for replication `rep`.
    pub fn prepare(&self, rep: usize) -> Result<ReplicationData, BenchError> {
        let cfg = &self.cfg;
        let seed = replication_seed(cfg.base_seed, rep as u64);
        let full = match (&cfg.data, &self.table) {
            (DataSource::Hetero1d { n }, _) => gen_hetero_sim(*n, stream(seed, 0)),
            (DataSource::Gaussian { n, d }, _) => gen_gaussian_sim(*n, *d, stream(seed, 0)),
            (DataSource::Csv { .. }, Some(t)) => t.clone(),
            (DataSource::Csv { .. }, None) => unreachable!("csv source loaded at construction"),
        };
        let h = cfg.holdout_fraction;
        let mut parts = split(&full, &SplitSpec::new(vec![1.0 - h, h], stream(seed, 1))?)?.into_iter();
        let source = parts.next().unwrap();
        let holdout = parts.next().unwrap();
        let m = cfg.target_size.unwrap_or(holdout.n_rows());
        let shifted = match &cfg.shift {
            ShiftSpec::None => holdout,
            ShiftSpec::Tilt { beta } => tilt_resample(&holdout, beta, m, stream(seed, 2))?,
            ShiftSpec::LogisticTilt { beta } => logistic_resample(&holdout, beta, m, stream(seed, 2))?,
            ShiftSpec::Affine { a, b } => {
                let a = Matrix::from_rows(a).ok_or_else(|| config_err("shift.a", "ragged matrix"))?;
                affine_shift(&holdout, &a, b)?
            }
        };
        let target_y = shifted.labels()?.to_vec();
        let blocks =
            split_source(&source, cfg.split, stream(seed, 3)).map_err(|e| config_err("split", e.to_string()))?;
        Ok(ReplicationData {
            seed,
            blocks,
            target: shifted.without_labels(),
            target_y,
        })
    }

    /// Runs every method on replication `rep`.
    pub fn replicate(&self, rep: usize) -> Replication {
        let outcomes = match self.prepare(rep) {
            Ok(data) => self
                .cfg
                .methods
                .iter()
                .map(|m| MethodOutcome {
                    method: m.name().to_string(),
                    result: self.run_method(m, &data, rep),
                })
                .collect(),
            Err(e) => self
                .cfg
                .methods
                .iter()
                .map(|m| MethodOutcome {
                    method: m.name().to_string(),
                    result: Err(format!("data preparation failed: {e}")),
                })
                .collect(),
        };
        Replication { rep, outcomes }
    }

    fn ratio(&self, data: &ReplicationData, opts: &RatioOptions) -> Result<DensityRatioModel, String> {
        fit_density_ratio(data.blocks.d1.x(), data.target.x(), opts).map_err(|e| e.to_string())
    }

    fn run_method(&self, m: &MethodSpec, data: &ReplicationData, rep: usize) -> Result<MethodRun, String> {
        let alpha = self.cfg.alpha_level;
        let tx = data.target.x();
        let start = Instant::now();
        let (intervals, fit) = match m {
            MethodSpec::Alg1(Alg1Method {
                weights, ratio, params, ..
            }) => {
                let known;
                let weighting = match weights {
                    WeightSource::Estimate => Weighting::Estimate(*ratio),
                    WeightSource::Uniform => Weighting::Uniform,
                    WeightSource::Known => {
                        known = self.known.as_ref().ok_or("no known ratio for this scenario")?;
                        Weighting::Known(known.as_ref())
                    }
                };
                let fit = fit_alg1(&data.blocks, tx, alpha, params, &weighting).map_err(|e| e.to_string())?;
                let iv = predict_interval(&fit.model, tx).map_err(|e| e.to_string())?;
                (iv, Some(fit))
            }
            MethodSpec::Alg2(Alg2Method { params, .. }) => {
                let fit = fit_alg2(&data.blocks, tx, alpha, params, None).map_err(|e| e.to_string())?;
                let iv = predict_interval(&fit.model, tx).map_err(|e| e.to_string())?;
                (iv, Some(fit))
            }
            MethodSpec::Wvac(WvacMethod {
                weights, ratio, params, ..
            }) => {
                let r = match weights {
                    WeightSource::Estimate => Some(self.ratio(data, ratio)?),
                    _ => None,
                };
                let cal = data.blocks.d21.concat(&data.blocks.d22).map_err(|e| e.to_string())?;
                let model = fit_wvac(&data.blocks.d1, &cal, r.as_ref(), params).map_err(|e| e.to_string())?;
                (predict_wvac(&model, tx, alpha).map_err(|e| e.to_string())?, None)
            }
            MethodSpec::Wqc(WqcMethod { weights, ratio, .. }) => {
                let r = match weights {
                    WeightSource::Estimate => Some(self.ratio(data, ratio)?),
                    _ => None,
                };
                let cal = data.blocks.d21.concat(&data.blocks.d22).map_err(|e| e.to_string())?;
                let model = fit_wqc(&data.blocks.d1, &cal, r.as_ref(), alpha).map_err(|e| e.to_string())?;
                (predict_wqc(&model, tx, alpha).map_err(|e| e.to_string())?, None)
            }
        };
        let runtime = start.elapsed().as_secs_f64();
        let cw = coverage_and_width(&intervals, &data.target_y).map_err(|e| e.to_string())?;
        Ok(MethodRun {
            row: RunRow {
                rep,
                method: m.name().to_string(),
                coverage: cw.coverage,
                avg_width: cw.avg_width,
                lambda_hat: fit.as_ref().map(|f| f.model.shrink.lambda_hat),
                runtime_s: if self.cfg.record_runtime { runtime } else { 0.0 },
                n_infinite: cw.n_infinite,
            },
            fit,
        })
    }
}

/// One row of `per_rep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub rep: usize,
    pub method: String,
    pub coverage: f64,
    pub avg_width: f64,
    /// Absent for the conformal baselines.
    pub lambda_hat: Option<f64>,
    pub runtime_s: f64,
    pub n_infinite: usize,
}

pub const PER_REP_COLUMNS: [&str; 7] = [
    "rep",
    "method",
    "coverage",
    "avg_width",
    "lambda_hat",
    "runtime_s",
    "n_infinite",
];

pub struct MethodRun {
    pub row: RunRow,
    /// The fitted pipeline, for the aggregation methods.
    pub fit: Option<FitOutput>,
}

pub struct MethodOutcome {
    pub method: String,
    pub result: Result<MethodRun, String>,
}

pub struct Replication {
    pub rep: usize,
    pub outcomes: Vec<MethodOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub rep: usize,
    pub method: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Method names in configuration order.
    pub methods: Vec<String>,
    pub rows: Vec<RunRow>,
    pub failures: Vec<Failure>,
    pub alpha_level: f64,
    pub replications: usize,
    pub base_seed: u64,
}

impl RunSummary {
    pub fn rows_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a RunRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method)
    }
}

/// Runs all replications (in parallel) and merges results in replication order.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunSummary, BenchError> {
    let scenario = Scenario::new(cfg.clone())?;
    let reps: Vec<Replication> = (0..cfg.replications).into_par_iter().map(|r| scenario.replicate(r)).collect();
    Ok(collect_summary(cfg, reps))
}

pub fn collect_summary(cfg: &ScenarioConfig, reps: Vec<Replication>) -> RunSummary {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for rep in reps {
        for o in rep.outcomes {
            match o.result {
                Ok(run) => rows.push(run.row),
                Err(message) => failures.push(Failure {
                    rep: rep.rep,
                    method: o.method,
                    message,
                }),
            }
        }
    }
    RunSummary {
        methods: cfg.methods.iter().map(|m| m.name().to_string()).collect(),
        rows,
        failures,
        alpha_level: cfg.alpha_level,
        replications: cfg.replications,
        base_seed: cfg.base_seed,
    }
}

/// Location and spread of one metric. Quantiles interpolate linearly
/// between order statistics; `sd` uses the `n − 1` divisor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub count: usize,
    pub median: Option<f64>,
    pub q25: Option<f64>,
    pub q75: Option<f64>,
    pub iqr: Option<f64>,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
}

/// Linearly interpolated quantile of sorted data.
pub fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Statistics over the finite values.
pub fn metric_stats(values: &[f64]) -> MetricStats {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return MetricStats {
            count: 0,
            median: None,
            q25: None,
            q75: None,
            iqr: None,
            mean: None,
            sd: None,
        };
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let q25 = interpolated_quantile(&v, 0.25);
    let q75 = interpolated_quantile(&v, 0.75);
    MetricStats {
        count: n,
        median: Some(interpolated_quantile(&v, 0.5)),
        q25: Some(q25),
        q75: Some(q75),
        iqr: Some(q75 - q25),
        mean: Some(mean),
        sd: Some(sd),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub n_ok: usize,
    pub n_failed: usize,
    /// Replications whose shrink level exceeded 1.
    pub n_lambda_above_one: usize,
    pub coverage: MetricStats,
    pub avg_width: MetricStats,
    pub lambda_hat: MetricStats,
    pub runtime_s: MetricStats,
    pub n_infinite: MetricStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub alpha_level: f64,
    pub replications: usize,
    pub base_seed: u64,
    pub methods: Vec<MethodSummary>,
    pub failures: Vec<Failure>,
}

pub fn summarize(s: &RunSummary) -> SummaryReport {
    let methods = s
        .methods
        .iter()
        .map(|name| {
            let rows: Vec<&RunRow> = s.rows_for(name).collect();
            let col = |f: &dyn Fn(&RunRow) -> Option<f64>| rows.iter().filter_map(|r| f(r)).collect::<Vec<f64>>();
            MethodSummary {
                method: name.clone(),
                n_ok: rows.len(),
                n_failed: s.failures.iter().filter(|f| &f.method == name).count(),
                n_lambda_above_one: rows.iter().filter(|r| r.lambda_hat.is_some_and(|l| l > 1.0)).count(),
                coverage: metric_stats(&col(&|r| Some(r.coverage))),
                avg_width: metric_stats(&col(&|r| Some(r.avg_width))),
                lambda_hat: metric_stats(&col(&|r| r.lambda_hat)),
                runtime_s: metric_stats(&col(&|r| Some(r.runtime_s))),
                n_infinite: metric_stats(&col(&|r| Some(r.n_infinite as f64))),
            }
        })
        .collect();
    SummaryReport {
        alpha_level: s.alpha_level,
        replications: s.replications,
        base_seed: s.base_seed,
        methods,
        failures: s.failures.clone(),
    }
}

pub fn write_per_rep(rows: &[RunRow], path: &Path) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(PER_REP_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_per_rep(path: &Path) -> Result<Vec<RunRow>, BenchError> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<Result<Vec<RunRow>, _>>()?;
    Ok(rows)
}

/// Writes `per_rep.csv` and `summary.json` into `dir`.
pub fn emit_report(s: &RunSummary, dir: &Path) -> Result<(), BenchError> {
    fs::create_dir_all(dir)?;
    write_per_rep(&s.rows, &dir.join("per_rep.csv"))?;
    let json = serde_json::to_string_pretty(&summarize(s))?;
    fs::write(dir.join("summary.json"), json + "\n")?;
    Ok(())
}

/// Preset scenarios for data generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// One-dimensional heteroskedastic data, target tilted by `σ(2x)`.
    Hetero1d,
    /// Five Gaussian covariates, target tilted by `exp(xᵀβ)` with
    /// `β = (−0.5, 0, 0, 0, 0.5)`.
    Tilt,
    /// Five Gaussian covariates, target `A·x + b` with
    /// `A = diag(1.5, 1.2, 1.6, 2, 1.8)`, `b = (1, 0, 0, 1, 0)`.
    Affine,
}

impl Preset {
    pub fn config(self, n: usize, seed: u64) -> ScenarioConfig {
        let (data, shift) = match self {
            Preset::Hetero1d => (DataSource::Hetero1d { n }, ShiftSpec::LogisticTilt { beta: vec![2.0] }),
            Preset::Tilt => (
                DataSource::Gaussian { n, d: 5 },
                ShiftSpec::Tilt {
                    beta: vec![-0.5, 0.0, 0.0, 0.0, 0.5],
                },
            ),
            Preset::Affine => {
                let diag = [1.5, 1.2, 1.6, 2.0, 1.8];
                let a = (0..5)
                    .map(|i| (0..5).map(|j| if i == j { diag[i] } else { 0.0 }).collect())
                    .collect();
                (
                    DataSource::Gaussian { n, d: 5 },
                    ShiftSpec::Affine {
                        a,
                        b: vec![1.0, 0.0, 0.0, 1.0, 0.0],
                    },
                )
            }
        };
        ScenarioConfig {
            base_seed: seed,
            ..ScenarioConfig::new(data, shift, Vec::new())
        }
    }
}

/// Labeled source sample and labeled target sample for a preset.
pub fn generate(preset: Preset, n: usize, seed: u64) -> Result<(DataTable, DataTable), BenchError> {
    let scenario = Scenario::new(preset.config(n, seed))?;
    let data = scenario.prepare(0)?;
    let b = &data.blocks;
    let source = b.d1.concat(&b.d21)?.concat(&b.d22)?;
    let target = DataTable::new(
        data.target.x().clone(),
        Some(data.target_y),
        data.target.column_names().to_vec(),
    )?;
    Ok((source, target))
}
