use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fairfit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairfit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    /// Simulated data plus a schema naming its columns.
    fn new(example: u32, n: usize) -> Self {
        let ws = Workspace {
            dir: tempfile::tempdir().unwrap(),
        };
        let out = fairfit(&[
            "synth",
            "--example",
            &example.to_string(),
            "--n",
            &n.to_string(),
            "--seed",
            "7",
            "--out",
            ws.s("data.csv").as_str(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        std::fs::write(
            ws.path("schema.json"),
            r#"{"response":"y","sensitive":["s1","s2","s3"],"predictors":["x1","x2","x3"]}"#,
        )
        .unwrap();
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    fn fit(&self, extra: &[&str]) -> Output {
        let (data, schema, out) = (self.s("data.csv"), self.s("schema.json"), self.s("model.json"));
        let mut args = vec!["fit", "--data", &data, "--schema", &schema, "--out", &out];
        args.extend_from_slice(extra);
        fairfit(&args)
    }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn numbers(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

/// Header plus rows as raw fields.
fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

#[test]
fn fit_at_zero_gives_zero_sensitive_coefficients() {
    let ws = Workspace::new(1, 1000);
    let out = ws.fit(&["--r", "0"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let model = read_json(&ws.path("model.json"));
    let alpha = numbers(&model["alpha"]);
    assert_eq!(alpha.len(), 3);
    assert!(alpha.iter().all(|a| *a == 0.0), "{alpha:?}");
    assert!(model["lambda_r"].is_null());
}

#[test]
fn out_of_range_bound_is_a_usage_error_naming_the_option() {
    let ws = Workspace::new(1, 200);
    let out = ws.fit(&["--r", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--r"), "{}", stderr(&out));
}

#[test]
fn convex_weight_rules_are_enforced() {
    let ws = Workspace::new(1, 200);
    let out = ws.fit(&["--r", "0.1", "--definition", "convex"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--w"));

    let out = ws.fit(&["--r", "0.1", "--definition", "max", "--w", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--w"));
}

#[test]
fn missing_column_is_a_data_error_naming_the_column() {
    let ws = Workspace::new(1, 200);
    std::fs::write(
        ws.path("schema.json"),
        r#"{"response":"y","sensitive":["gender"]}"#,
    )
    .unwrap();
    let out = ws.fit(&["--r", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("gender"), "{}", stderr(&out));
}

#[test]
fn malformed_thread_cap_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fairfit"))
        .env("FAIRFIT_THREADS", "many")
        .args(["synth", "--example", "1", "--n", "50", "--out"])
        .arg(dir.path().join("d.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("FAIRFIT_THREADS"));
}

#[test]
fn help_and_unknown_verbs() {
    assert_eq!(fairfit(&["--help"]).status.code(), Some(0));
    assert_eq!(fairfit(&["fit", "--help"]).status.code(), Some(0));
    assert_eq!(fairfit(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(fairfit(&[]).status.code(), Some(1));
}

#[test]
fn fit_then_predict_reproduces_fitted_values() {
    for (example, family) in [(1, "gaussian"), (2, "binomial")] {
        let ws = Workspace::new(example, 400);
        let out = ws.fit(&["--r", "0.05", "--family", family, "--lambda2", "0.5"]);
        assert!(out.status.success(), "{}", stderr(&out));
        let out = fairfit(&[
            "predict",
            "--model",
            &ws.s("model.json"),
            "--data",
            &ws.s("data.csv"),
            "--out",
            &ws.s("preds.csv"),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        let model = read_json(&ws.path("model.json"));
        let fitted = numbers(&model["fitted"]);
        let (header, rows) = read_table(&ws.path("preds.csv"));
        assert_eq!(header, vec!["prediction"]);
        assert_eq!(rows.len(), fitted.len());
        for (row, f) in rows.iter().zip(&fitted) {
            let p: f64 = row[0].parse().unwrap();
            assert!((p - f).abs() <= 1e-10 * (1.0 + f.abs()), "{p} vs {f}");
        }
    }
}

#[test]
fn predict_does_not_need_the_response_column() {
    let ws = Workspace::new(1, 200);
    assert!(ws.fit(&["--r", "0.1"]).status.success());
    let text = std::fs::read_to_string(ws.path("data.csv")).unwrap();
    let stripped: String = text
        .lines()
        .map(|l| l.split_once(',').unwrap().1.to_string() + "\n")
        .collect();
    std::fs::write(ws.path("features.csv"), stripped).unwrap();
    let out = fairfit(&[
        "predict",
        "--model",
        &ws.s("model.json"),
        "--data",
        &ws.s("features.csv"),
        "--out",
        &ws.s("preds.csv"),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn profile_keeps_beta_constant_across_the_grid() {
    let ws = Workspace::new(1, 1000);
    let out = fairfit(&[
        "profile",
        "--data",
        &ws.s("data.csv"),
        "--schema",
        &ws.s("schema.json"),
        "--out",
        &ws.s("sweep.csv"),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let (header, rows) = read_table(&ws.path("sweep.csv"));
    assert_eq!(rows.len(), 7);
    let beta_cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("beta_"))
        .map(|(i, _)| i)
        .collect();
    assert_eq!(beta_cols.len(), 3);
    for &j in &beta_cols {
        assert!(rows.iter().all(|r| r[j] == rows[0][j]), "column {}", header[j]);
    }
    let alpha = header.iter().position(|h| h == "alpha_s1").unwrap();
    assert_ne!(rows[0][alpha], rows[rows.len() - 1][alpha]);
}

#[test]
fn verbs_are_deterministic_given_the_seed() {
    let ws = Workspace::new(1, 300);
    let run_cv = |name: &str, threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_fairfit"))
            .env("FAIRFIT_THREADS", threads)
            .args(["cv", "--folds", "5", "--runs", "2", "--seed", "3", "--r-grid", "0,0.05,0.2"])
            .args(["--data", &ws.s("data.csv"), "--schema", &ws.s("schema.json")])
            .args(["--out", &ws.s(name)])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", stderr(&out));
        std::fs::read(ws.path(name)).unwrap()
    };
    let a = run_cv("cv_a.csv", "1");
    let b = run_cv("cv_b.csv", "4");
    assert_eq!(a, b);
    let (_, rows) = read_table(&ws.path("cv_a.csv"));
    assert_eq!(rows.len(), 2 * 5 * 3);

    let again = Workspace::new(1, 300);
    assert_eq!(
        std::fs::read(ws.path("data.csv")).unwrap(),
        std::fs::read(again.path("data.csv")).unwrap()
    );
}

#[test]
fn cv_writes_json_aggregates_on_request() {
    let ws = Workspace::new(2, 300);
    let out = fairfit(&[
        "cv",
        "--family",
        "binomial",
        "--folds",
        "3",
        "--runs",
        "1",
        "--r-grid",
        "0.05,0.1",
        "--data",
        &ws.s("data.csv"),
        "--schema",
        &ws.s("schema.json"),
        "--out",
        &ws.s("cv.csv"),
        "--json",
        &ws.s("cv.json"),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = read_json(&ws.path("cv.json"));
    assert_eq!(report["metric"], "f1");
    assert_eq!(report["aggregates"].as_array().unwrap().len(), 2);
}

#[test]
fn bias_demo_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bias.csv");
    let out = fairfit(&[
        "bias-demo",
        "--n",
        "300",
        "--r-list",
        "0.01,0.1",
        "--lambda-grid",
        "log:0:3:7",
        "--folds",
        "5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let (header, rows) = read_table(&path);
    assert_eq!(header, vec!["lambda", "r", "ratio", "in_cv_band"]);
    assert_eq!(rows.len(), 14);

    let out = fairfit(&["bias-demo", "--lambda-grid", "log:3:1:5", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--lambda-grid"));
}

#[test]
fn synth_rejects_unknown_examples() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let out = fairfit(&["synth", "--example", "3", "--n", "100", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--example"));
}
