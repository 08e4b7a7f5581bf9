use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rarefit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

/// The 105-row 2x2 example.
fn two_by_two_csv(dir: &Path) -> PathBuf {
    let mut s = String::from("y,x\n");
    for (x, events, controls) in [(0, 5, 95), (1, 1, 4)] {
        for _ in 0..controls {
            s.push_str(&format!("0,{x}\n"));
        }
        for _ in 0..events {
            s.push_str(&format!("1,{x}\n"));
        }
    }
    write(dir, "two_by_two.csv", &s)
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", stderr(o));
    serde_json::from_str(&stdout(o)).unwrap()
}

fn predictions(v: &Value, method: &str) -> Vec<f64> {
    v["predictions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["method"] == method)
        .unwrap()["pi"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[test]
fn fit_reports_coefficients_for_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let csv = two_by_two_csv(dir.path());
    let o = run(&[
        "fit", "--input", csv.to_str().unwrap(), "--outcome", "y", "--methods", "fl,flic,flac",
        "--format", "json",
    ]);
    let v = json(&o);
    assert_eq!(v["schema_version"], 1);
    let logistic = |e: f64| 1.0 / (1.0 + (-e).exp());
    let expect = [("fl", 0.0545, 0.25), ("flic", 0.0486, 0.2282), ("flac", 0.0516, 0.1683)];
    for (m, (name, p0, p1)) in v["models"].as_array().unwrap().iter().zip(expect) {
        assert_eq!(m["method"], name);
        let c = m["coefficients"].as_array().unwrap();
        let b0 = c[0]["estimate"].as_f64().unwrap();
        let b1 = c[1]["estimate"].as_f64().unwrap();
        assert!((logistic(b0) - p0).abs() < 1e-4, "{name}");
        assert!((logistic(b0 + b1) - p1).abs() < 1e-4, "{name}");
        assert!(c[0]["odds_ratio"].is_null());
        assert!((c[1]["odds_ratio"].as_f64().unwrap() - b1.exp()).abs() < 1e-12);
        assert!(c[1]["lower"].as_f64().unwrap() < b1 && b1 < c[1]["upper"].as_f64().unwrap());
    }
    assert_eq!(v["models"][1]["coefficients"][0]["ci_method"], "flic-intercept");
}

#[test]
fn fit_tsv_uses_six_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let csv = two_by_two_csv(dir.path());
    let o = run(&["fit", "--input", csv.to_str().unwrap(), "--outcome", "y", "--methods", "ml"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("method\tterm\testimate"));
    // log(0.2/0.8 / (0.05/0.95)) = log(4.75)
    let row: Vec<&str> = lines[2].split('\t').collect();
    assert_eq!(row[1], "x");
    assert_eq!(row[2], "1.55814");
    assert_eq!(row[4], "4.75");
}

#[test]
fn intercept_only_fit() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "d.csv", "y,z\n1,3\n0,1\n0,2\n0,5\n1,4\n0,0\n0,1\n0,2\n");
    let o = run(&[
        "fit", "--input", csv.to_str().unwrap(), "--outcome", "y", "--covariates", "", "--methods", "ml",
        "--format", "json",
    ]);
    let v = json(&o);
    let c = v["models"][0]["coefficients"].as_array().unwrap();
    assert_eq!(c.len(), 1);
    assert!(c[0]["odds_ratio"].is_null());
    assert!((c[0]["estimate"].as_f64().unwrap() - (0.25f64 / 0.75).ln()).abs() < 1e-8);
}

#[test]
fn data_errors_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let constant = write(dir.path(), "c.csv", "y,a,const\n1,0.5,2\n0,1.5,2\n0,2.5,2\n1,0.1,2\n0,3,2\n");
    let o = run(&["fit", "--input", constant.to_str().unwrap(), "--outcome", "y"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("rank deficient") && stderr(&o).contains("const"), "{}", stderr(&o));

    let nonbinary = write(dir.path(), "n.csv", "y,a\n1,0\n2,1\n0,1\n");
    let o = run(&["fit", "--input", nonbinary.to_str().unwrap(), "--outcome", "y"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("not binary"));

    let o = run(&["fit", "--input", nonbinary.to_str().unwrap(), "--outcome", "missing"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("`missing` not found"));

    let malformed = write(dir.path(), "m.csv", "y,a\n1,0\n0,abc\n");
    let o = run(&["fit", "--input", malformed.to_str().unwrap(), "--outcome", "y"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("not a number"));

    let ragged = write(dir.path(), "r.csv", "y,a\n1,0\n0\n");
    let o = run(&["fit", "--input", ragged.to_str().unwrap(), "--outcome", "y"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let csv = two_by_two_csv(dir.path());
    let p = csv.to_str().unwrap();
    assert_eq!(run(&["predict", "--input", p, "--outcome", "y", "--methods", ""]).status.code(), Some(2));
    assert_eq!(run(&["fit", "--input", p, "--outcome", "y", "--methods", "ab"]).status.code(), Some(2));
    assert_eq!(run(&["fit", "--input", p, "--outcome", "y", "--methods", "bogus"]).status.code(), Some(2));
    assert_eq!(run(&["fit", "--input", p]).status.code(), Some(2));
    assert_eq!(run(&["fit", "--input", p, "--outcome", "y", "--level", "1.5"]).status.code(), Some(2));
}

#[test]
fn predict_averages_for_correctors() {
    let dir = tempfile::tempdir().unwrap();
    let csv = two_by_two_csv(dir.path());
    let o = run(&["predict", "--input", csv.to_str().unwrap(), "--outcome", "y", "--methods", "fl,ab,au"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let last: Vec<&str> = out.lines().last().unwrap().split('\t').collect();
    assert_eq!(last[0], "mean");
    let means: Vec<f64> = last[1..4].iter().map(|s| s.parse().unwrap()).collect();
    for (m, t) in means.iter().zip([0.0638, 0.0704, 0.0571]) {
        assert!((m - t).abs() < 1e-4, "{m} vs {t}");
    }
    assert!(out.lines().next().unwrap().ends_with("au_clipped"));
    assert_eq!(out.lines().count(), 107);
}

#[test]
fn au_flags_rows_outside_unit_interval() {
    let dir = tempfile::tempdir().unwrap();
    // x predicts y; one row far out on the low side
    let mut s = String::from("y,x\n");
    for i in 0..40 {
        let x = -1.0 + 2.0 * i as f64 / 39.0;
        let y = u8::from((i % 4 == 0 && x > -0.2) || x > 0.7);
        s.push_str(&format!("{y},{x:.4}\n"));
    }
    s.push_str("0,-6\n");
    let csv = write(dir.path(), "lev.csv", &s);
    let o = run(&[
        "predict", "--input", csv.to_str().unwrap(), "--outcome", "y", "--methods", "au", "--format", "json",
    ]);
    let v = json(&o);
    let p = &v["predictions"][0];
    let clipped: Vec<bool> = p["clipped"].as_array().unwrap().iter().map(|b| b.as_bool().unwrap()).collect();
    let pi: Vec<f64> = p["pi"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(clipped.iter().any(|&c| c));
    for (c, v) in clipped.iter().zip(&pi) {
        assert_eq!(*c, !(0.0..=1.0).contains(v));
    }
}

#[test]
fn json_round_trip_reproduces_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let csv = two_by_two_csv(dir.path());
    let p = csv.to_str().unwrap();
    let model = dir.path().join("model.json");
    let o = run(&[
        "fit", "--input", p, "--outcome", "y", "--methods", "ml,fl,flic,flac,lf,cp,rr,wf", "--format", "json",
        "--output", model.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let methods = "ml,fl,flic,flac,lf,cp,rr,wf,ab,au";
    let fresh = json(&run(&["predict", "--input", p, "--outcome", "y", "--methods", methods, "--format", "json"]));
    let reloaded = json(&run(&[
        "predict", "--input", p, "--outcome", "y", "--methods", methods, "--format", "json", "--model",
        model.to_str().unwrap(),
    ]));
    for m in methods.split(',') {
        assert_eq!(predictions(&fresh, m), predictions(&reloaded, m), "{m}");
    }
}

const SMOKE: &str = "seed = 5\nreplications = 1\n\n[[scenarios]]\nn = 500\nevent_rate = 0.05\neffect = 0.5\nsigns = \"mixed\"\n";

#[test]
fn simulate_smoke_run_emits_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write(dir.path(), "s.toml", SMOKE);
    let out = dir.path().join("out");
    let o = run(&["simulate", "--scenario", scen.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for t in ["event_rate", "predictions", "calibration", "coefficients", "intervals"] {
        let body = fs::read_to_string(out.join(format!("{t}.tsv"))).unwrap();
        let lines: Vec<&str> = body.lines().collect();
        assert!(lines[0].contains("excluded_separation"));
        assert_eq!(lines.len(), 11, "{t}: header plus one row per method");
    }
    let rerun = dir.path().join("again");
    let o = run(&["simulate", "--scenario", scen.to_str().unwrap(), "--out-dir", rerun.to_str().unwrap()]);
    assert!(o.status.success());
    for t in ["event_rate", "predictions", "calibration", "coefficients", "intervals"] {
        let f = format!("{t}.tsv");
        assert_eq!(fs::read(out.join(&f)).unwrap(), fs::read(rerun.join(&f)).unwrap());
    }
}

#[test]
fn simulate_json_and_invalid_grid() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write(dir.path(), "s.toml", SMOKE);
    let out = dir.path().join("json");
    let o = run(&[
        "simulate", "--scenario", scen.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "--format", "json",
        "--methods", "ml,fl",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["scenarios"][0]["reports"].as_array().unwrap().len(), 2);

    let bad = write(dir.path(), "bad.toml", "seed = 1\nreplications = 1\n[[scenarios]]\nn = 100\nevent_rate = 0.01\neffect = 0.5\n");
    let o = run(&["simulate", "--scenario", bad.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("below 20"));
}
