use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use piagg::aggregate::{
    diagnose, fit_alg1, fit_alg2, predict_interval, split_source, Alg1Config, Alg2Config, IntervalBatch, PiModel,
    Weighting,
};
use piagg::bench::{coverage_and_width, emit_report, generate, run_scenario, summarize, Preset, ScenarioConfig};
use piagg::dataset::{load_csv, DataTable};
use piagg::densratio::RatioOptions;

#[derive(Parser)]
#[command(name = "piagg", version, about = "Prediction intervals under distribution shift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Alg1,
    Alg2,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo scenario and write per_rep.csv and summary.json.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit an interval model on labeled source data and unlabeled target covariates.
    Fit {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target_x: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        model: PathBuf,
        /// Response column of the source file (dropped from the target file if present).
        #[arg(long, default_value = "y")]
        label: String,
        /// JSON file with pipeline parameters.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Seed for the three-way source split.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write intervals for new covariates.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Column ignored in the covariate file if present.
        #[arg(long, default_value = "y")]
        label: String,
    },
    /// Score intervals against responses.
    Eval {
        #[arg(long)]
        intervals: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "y")]
        label: String,
    },
    /// Generate a labeled source sample (and optionally the shifted target).
    Gen {
        #[arg(long, value_enum)]
        scenario: GenScenario,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        target_out: Option<PathBuf>,
        #[arg(long, default_value_t = 2500)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GenScenario {
    Hetero1d,
    Tilt,
    Affine,
}

struct CliError {
    kind: &'static str,
    message: String,
    code: u8,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            kind: "usage",
            message: message.into(),
            code: 2,
        }
    }
}

macro_rules! from_err {
    ($t:ty, $kind:expr) => {
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self {
                    kind: $kind,
                    message: e.to_string(),
                    code: 1,
                }
            }
        }
    };
}

from_err!(piagg::dataset::DataError, "data");
from_err!(piagg::aggregate::AggregateError, "fit");
from_err!(std::io::Error, "io");
from_err!(serde_json::Error, "json");

impl From<piagg::bench::BenchError> for CliError {
    fn from(e: piagg::bench::BenchError) -> Self {
        let kind = match e {
            piagg::bench::BenchError::Config { .. } => "config",
            _ => "bench",
        };
        Self {
            kind,
            message: e.to_string(),
            code: if kind == "config" { 2 } else { 1 },
        }
    }
}

/// Covariates of a CSV file, ignoring `label` if it is a column.
fn load_covariates(path: &Path, label: &str) -> Result<DataTable, CliError> {
    let t = match load_csv(path, Some(label)) {
        Ok(t) => t.without_labels(),
        Err(piagg::dataset::DataError::MissingColumn(_)) => load_csv(path, None)?,
        Err(e) => return Err(e.into()),
    };
    Ok(t)
}

fn read_params<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize(de).map_err(|e| CliError {
                kind: "config",
                message: format!("invalid params at `{}`: {}", e.path(), e.inner()),
                code: 2,
            })
        }
    }
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Bench { config, out } => {
            let cfg = ScenarioConfig::from_file(&config)?;
            let dir = out
                .or_else(|| cfg.output_dir.clone())
                .ok_or_else(|| CliError::usage("no output directory: pass --out or set output_dir"))?;
            let summary = run_scenario(&cfg)?;
            emit_report(&summary, &dir)?;
            let report = summarize(&summary);
            for m in &report.methods {
                eprintln!(
                    "{}: median coverage {:.4}, mean width {:.4}, {} ok, {} failed",
                    m.method,
                    m.coverage.median.unwrap_or(f64::NAN),
                    m.avg_width.mean.unwrap_or(f64::NAN),
                    m.n_ok,
                    m.n_failed
                );
            }
        }
        Command::Fit {
            source,
            target_x,
            method,
            alpha,
            model,
            label,
            params,
            seed,
        } => {
            let src = load_csv(&source, Some(&label))?;
            let target = load_covariates(&target_x, &label)?;
            let blocks = split_source(&src, [0.5, 0.25, 0.25], seed)?;
            let fit = match method {
                Method::Alg1 => {
                    let cfg: Alg1Config = read_params(params.as_deref())?;
                    fit_alg1(&blocks, target.x(), alpha, &cfg, &Weighting::Estimate(RatioOptions::default()))?
                }
                Method::Alg2 => {
                    let cfg: Alg2Config = read_params(params.as_deref())?;
                    fit_alg2(&blocks, target.x(), alpha, &cfg, None)?
                }
            };
            if let Some(w) = diagnose(&fit.model).warning {
                eprintln!("warning: {w}");
            }
            fs::write(&model, fit.model.to_json())?;
        }
        Command::Predict { model, x, out, label } => {
            let m = PiModel::from_json(&fs::read_to_string(&model)?)?;
            let t = load_covariates(&x, &label)?;
            predict_interval(&m, t.x())?.write_csv(&out)?;
        }
        Command::Eval {
            intervals,
            labels,
            out,
            label,
        } => {
            let iv = IntervalBatch::read_csv(&intervals)?;
            let t = match load_csv(&labels, Some(&label)) {
                Ok(t) => t,
                Err(piagg::dataset::DataError::MissingColumn(_)) => {
                    let t = load_csv(&labels, None)?;
                    if t.dim() != 1 {
                        return Err(CliError::usage(format!(
                            "labels file has no {label:?} column and more than one column"
                        )));
                    }
                    DataTable::from_parts(t.x().clone(), Some(t.x().column(0)))?
                }
                Err(e) => return Err(e.into()),
            };
            let cw = coverage_and_width(&iv, t.labels()?)?;
            let doc = json!({
                "n": iv.len(),
                "coverage": cw.coverage,
                "avg_width": if cw.avg_width.is_finite() { json!(cw.avg_width) } else { json!(null) },
                "n_infinite": cw.n_infinite,
            });
            fs::write(&out, serde_json::to_string_pretty(&doc)? + "\n")?;
        }
        Command::Gen {
            scenario,
            out,
            target_out,
            n,
            seed,
        } => {
            let preset = match scenario {
                GenScenario::Hetero1d => Preset::Hetero1d,
                GenScenario::Tilt => Preset::Tilt,
                GenScenario::Affine => Preset::Affine,
            };
            let (source, target) = generate(preset, n, seed)?;
            source.write_csv(&out)?;
            if let Some(p) = target_out {
                target.write_csv(&p)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::usage(e.render().to_string().trim().to_string());
            eprintln!("{}", json!({"error": {"kind": err.kind, "message": err.message}}));
            return ExitCode::from(err.code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", json!({"error": {"kind": err.kind, "message": err.message}}));
            ExitCode::from(err.code)
        }
    }
}
