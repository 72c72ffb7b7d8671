use std::fs;
use std::path::Path;
use std::process::Command;

use piagg::bench::{
    emit_report, metric_stats, read_per_rep, run_scenario, summarize, BenchError, Scenario, ScenarioConfig,
    SummaryReport, PER_REP_COLUMNS,
};

const SMOKE: &str = r#"{
  "data": {"source": "hetero1d", "n": 400},
  "shift": {"type": "logistic_tilt", "beta": [2.0]},
  "methods": [
    {"method": "alg1"},
    {"method": "alg1", "name": "alg1_hinge", "params": {"mode": "cov_shift_hinge"}},
    {"method": "alg2"},
    {"method": "wvac"},
    {"method": "wqc"}
  ],
  "replications": 3,
  "base_seed": 11,
  "record_runtime": false
}"#;

fn smoke_config() -> ScenarioConfig {
    ScenarioConfig::from_json(SMOKE).unwrap()
}

#[test]
fn smoke_run_produces_one_row_per_method_and_rep() {
    let s = run_scenario(&smoke_config()).unwrap();
    assert!(s.failures.is_empty(), "{:?}", s.failures);
    assert_eq!(s.rows.len(), 15);
    for r in &s.rows {
        assert!((0.0..=1.0).contains(&r.coverage));
        assert!(r.avg_width > 0.0);
        assert_eq!(r.runtime_s, 0.0);
    }
    let lam = |m: &str| s.rows_for(m).all(|r| r.lambda_hat.is_some());
    assert!(lam("alg1") && lam("alg1_hinge") && lam("alg2"));
    assert!(s.rows_for("wvac").all(|r| r.lambda_hat.is_none()));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let cfg = smoke_config();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    emit_report(&run_scenario(&cfg).unwrap(), a.path()).unwrap();
    emit_report(&run_scenario(&cfg).unwrap(), b.path()).unwrap();
    for f in ["per_rep.csv", "summary.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn summary_recomputes_from_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_scenario(&smoke_config()).unwrap();
    emit_report(&s, dir.path()).unwrap();
    let rows = read_per_rep(&dir.path().join("per_rep.csv")).unwrap();
    assert_eq!(rows.len(), s.rows.len());
    let report: SummaryReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    for m in &report.methods {
        let cov: Vec<f64> = rows.iter().filter(|r| r.method == m.method).map(|r| r.coverage).collect();
        let w: Vec<f64> = rows.iter().filter(|r| r.method == m.method).map(|r| r.avg_width).collect();
        let (c, ww) = (metric_stats(&cov), metric_stats(&w));
        assert!((c.median.unwrap() - m.coverage.median.unwrap()).abs() <= 1e-12);
        assert!((ww.mean.unwrap() - m.avg_width.mean.unwrap()).abs() <= 1e-12);
    }
}

#[test]
fn empty_method_list_gives_a_header_only_csv() {
    let mut cfg = smoke_config();
    cfg.methods.clear();
    let dir = tempfile::tempdir().unwrap();
    let s = run_scenario(&cfg).unwrap();
    emit_report(&s, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("per_rep.csv")).unwrap();
    assert_eq!(text.trim_end(), PER_REP_COLUMNS.join(","));
    assert!(summarize(&s).methods.is_empty());
}

#[test]
fn target_covariates_arrive_unlabeled() {
    let sc = Scenario::new(smoke_config()).unwrap();
    let d = sc.prepare(0).unwrap();
    assert!(d.target.y().is_none());
    assert_eq!(d.target_y.len(), d.target.n_rows());
    assert_eq!(d.target.n_rows(), 100);
    let n: usize = [&d.blocks.d1, &d.blocks.d21, &d.blocks.d22].iter().map(|b| b.n_rows()).sum();
    assert_eq!(n, 300);
}

fn config_path(json: &str) -> String {
    match ScenarioConfig::from_json(json) {
        Err(BenchError::Config { path, .. }) => path,
        Err(e) => panic!("unexpected error {e}"),
        Ok(c) => match Scenario::new(c) {
            Err(BenchError::Config { path, .. }) => path,
            Err(e) => panic!("unexpected error {e}"),
            Ok(_) => panic!("accepted {json}"),
        },
    }
}

#[test]
fn invalid_configs_name_the_field() {
    let base = r#""data":{"source":"hetero1d","n":200}"#;
    assert_eq!(config_path(&format!(r#"{{{base},"replications":0}}"#)), "replications");
    assert_eq!(config_path(&format!(r#"{{{base},"alpha_level":1.5}}"#)), "alpha_level");
    assert_eq!(config_path(&format!(r#"{{{base},"split":[0.5,0.5,0.5]}}"#)), "split");
    assert_eq!(config_path(&format!(r#"{{{base},"bogus":1}}"#)), "bogus");
    assert_eq!(
        config_path(&format!(r#"{{{base},"shift":{{"type":"tilt","beta":[1,2]}}}}"#)),
        "shift.beta"
    );
    assert!(config_path(&format!(r#"{{{base},"methods":[{{"method":"nope"}}]}}"#)).starts_with("methods[0]"));
    assert!(config_path(&format!(r#"{{{base},"methods":[{{"method":"alg1"}},{{"method":"alg1"}}]}}"#))
        .starts_with("methods"));
}

fn piagg(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_piagg")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn cli_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (src, tgt, model, iv, ev) = (
        d.join("src.csv"),
        d.join("tgt.csv"),
        d.join("model.json"),
        d.join("iv.csv"),
        d.join("eval.json"),
    );
    let out = piagg(&["gen", "--scenario", "hetero1d", "--out", p(&src), "--target-out", p(&tgt), "--n", "800"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for method in ["alg1", "alg2"] {
        let out = piagg(&["fit", "--source", p(&src), "--target-x", p(&tgt), "--method", method, "--model", p(&model)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let out = piagg(&["predict", "--model", p(&model), "--x", p(&tgt), "--out", p(&iv)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let out = piagg(&["eval", "--intervals", p(&iv), "--labels", p(&tgt), "--out", p(&ev)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&ev).unwrap()).unwrap();
        assert_eq!(doc["n"], 200);
        let cov = doc["coverage"].as_f64().unwrap();
        assert!(cov > 0.7, "{method} coverage {cov}");
    }

    let cfg = d.join("cfg.json");
    fs::write(&cfg, SMOKE.replace("\"replications\": 3", "\"replications\": 1")).unwrap();
    let out = piagg(&["bench", "--config", p(&cfg), "--out", p(&d.join("bench"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("bench/per_rep.csv").exists() && d.join("bench/summary.json").exists());
}

#[test]
fn cli_errors_are_json_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"data":{"source":"hetero1d","n":100},"alpha_level":2}"#).unwrap();
    let out = piagg(&["bench", "--config", p(&bad), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"]["kind"], "config");

    let out = piagg(&["predict", "--model", p(&dir.path().join("missing.json")), "--x", "x", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"]["kind"], "io");

    let out = piagg(&["fit"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(piagg(&["--help"]).status.success());
}
