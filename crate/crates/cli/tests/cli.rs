use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_bfa-elm");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "multi-line error: {err}");
    err
}

/// A small config keeps the optimizer-backed commands quick.
fn quick_config(dir: &Path) -> PathBuf {
    let path = dir.join("quick.json");
    fs::write(
        &path,
        r#"{"l_candidates": [4, 8], "bfa": {"population": 8, "chemotactic_steps": 6, "reproduction_steps": 2, "dispersal_events": 1}}"#,
    )
    .unwrap();
    path
}

fn generate(dir: &Path, n: usize) -> PathBuf {
    let path = dir.join(format!("data{n}.csv"));
    ok(dir, &["generate", "--n", &n.to_string(), "--seed", "42", "--out", path.to_str().unwrap()]);
    path
}

#[test]
fn generate_writes_header_and_rows_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let stdout = ok(d, &["generate", "--n", "200", "--noise", "0.02", "--seed", "42", "--out", "a.csv"]);
    assert!(stdout.contains("200"));
    ok(d, &["generate", "--n", "200", "--noise", "0.02", "--seed", "42", "--out", "b.csv"]);
    let a = fs::read_to_string(d.join("a.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(d.join("b.csv")).unwrap());
    assert_eq!(a.lines().next(), Some("HR,RA,RR,BI,FT,FPI"));
    assert_eq!(a.lines().count(), 201);

    let err = fails(d, &["generate", "--n", "0", "--out", "c.csv"]);
    assert!(err.contains("n must be ≥ 1"), "{err}");
}

#[test]
fn train_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = generate(d, 120);
    let cfg = quick_config(d);
    let (data, cfg) = (data.to_str().unwrap(), cfg.to_str().unwrap());

    let stdout = ok(d, &["train", "--data", data, "--config", cfg, "--seed", "3", "--out", "m.json"]);
    assert!(stdout.contains("chosen_L") && stdout.contains("best_fitness"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("m.report.json")).unwrap()).unwrap();
    assert_eq!(report["mode"], "bfa-elm");
    assert_eq!(report["config"]["seed"], 3);
    let trace: Vec<f64> = report["bfa_trace"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!(!trace.is_empty() && trace.windows(2).all(|w| w[1] <= w[0]));

    let first = fs::read(d.join("m.report.json")).unwrap();
    ok(d, &["train", "--data", data, "--config", cfg, "--seed", "3", "--out", "m.json"]);
    assert_eq!(first, fs::read(d.join("m.report.json")).unwrap());

    ok(d, &["train", "--data", data, "--config", cfg, "--mode", "elm", "--out", "e.json", "--report", "e-report.json"]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("e-report.json")).unwrap()).unwrap();
    assert_eq!(report["mode"], "elm");

    let stdout = ok(d, &["evaluate", "--model", "m.json", "--data", data, "--out", "pred.csv"]);
    let metrics: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let accuracy = metrics["accuracy"].as_f64().unwrap();
    assert!(accuracy.is_finite() && accuracy <= 100.0);
    let preds = fs::read_to_string(d.join("pred.csv")).unwrap();
    assert_eq!(preds.lines().next(), Some("index,true,predicted"));
    assert_eq!(preds.lines().count(), 121);

    let zeros: String = fs::read_to_string(data)
        .unwrap()
        .lines()
        .enumerate()
        .map(|(i, line)| {
            if i == 0 {
                format!("{line}\n")
            } else {
                let cells: Vec<&str> = line.split(',').collect();
                format!("{},0\n", cells[..5].join(","))
            }
        })
        .collect();
    fs::write(d.join("zeros.csv"), zeros).unwrap();
    let err = fails(d, &["evaluate", "--model", "m.json", "--data", "zeros.csv"]);
    assert!(err.contains("zero true value in MAPE"), "{err}");
}

#[test]
fn evaluate_rejects_mismatched_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = generate(d, 40);
    ok(d, &["train", "--data", data.to_str().unwrap(), "--mode", "elm", "--out", "m.json"]);
    let mut model: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("m.json")).unwrap()).unwrap();
    model["norm_stats"]["features"].as_array_mut().unwrap().pop();
    fs::write(d.join("bad.json"), model.to_string()).unwrap();
    let err = fails(d, &["evaluate", "--model", "bad.json", "--data", data.to_str().unwrap()]);
    assert!(err.contains("dimension mismatch"), "{err}");
}

#[test]
fn compare_writes_paired_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = generate(d, 80);
    let cfg = quick_config(d);
    let args = |out: &'static str| {
        vec![
            "compare".to_string(),
            "--data".into(),
            data.to_str().unwrap().into(),
            "--config".into(),
            cfg.to_str().unwrap().into(),
            "--seeds".into(),
            "1".into(),
            "--out".into(),
            out.into(),
        ]
    };
    let a: Vec<String> = args("one");
    ok(d, &a.iter().map(String::as_str).collect::<Vec<_>>());
    let csv = fs::read_to_string(d.join("one/per_seed.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("one/summary.json")).unwrap()).unwrap();
    for model in ["elm", "bfa_elm"] {
        for metric in ["mae", "mse", "mape"] {
            assert!(summary["medians"][model][metric].is_number());
        }
    }

    let b: Vec<String> = args("two");
    ok(d, &b.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(
        fs::read(d.join("one/summary.json")).unwrap(),
        fs::read(d.join("two/summary.json")).unwrap()
    );
    assert_eq!(csv, fs::read_to_string(d.join("two/per_seed.csv")).unwrap());

    let err = fails(d, &["compare", "--data", "missing.csv", "--seeds", "1", "--out", "x"]);
    assert!(err.contains("missing.csv"), "{err}");
}

#[test]
fn fpi_command() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("same.csv"), "h_ac,h_ex\n100,100\n250.5,250.5\n").unwrap();
    assert_eq!(ok(d, &["fpi", "--trace", "same.csv"]).trim(), "0");
    fs::write(d.join("dev.csv"), "h_ac,h_ex\n103,100\n96,100\n").unwrap();
    let v: f64 = ok(d, &["fpi", "--trace", "dev.csv"]).trim().parse().unwrap();
    assert!((v - 3.5355339059).abs() < 1e-9);

    fs::write(d.join("hdr.csv"), "alt,exp\n1,1\n").unwrap();
    assert!(fails(d, &["fpi", "--trace", "hdr.csv"]).contains("h_ac,h_ex"));
    fs::write(d.join("ragged.csv"), "h_ac,h_ex\n1,2\n3\n").unwrap();
    fails(d, &["fpi", "--trace", "ragged.csv"]);
    fs::write(d.join("empty.csv"), "h_ac,h_ex\n").unwrap();
    fails(d, &["fpi", "--trace", "empty.csv"]);
}

#[test]
fn correlate_command() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = generate(d, 200);
    let out: serde_json::Value = serde_json::from_str(&ok(d, &["correlate", "--data", data.to_str().unwrap()])).unwrap();
    let pairs = out.as_array().unwrap();
    let names: Vec<&str> = pairs.iter().map(|p| p["feature"].as_str().unwrap()).collect();
    assert_eq!(names, ["HR", "RA", "RR", "BI", "FT"]);
    assert!(pairs.iter().all(|p| p["r"].as_f64().unwrap().is_finite()));

    fs::write(
        d.join("copy.csv"),
        "HR,RA,RR,BI,FT,FPI\n0.1,0.5,0.2,0.9,0.3,0.1\n0.7,0.2,0.4,0.1,0.8,0.7\n0.4,0.9,0.6,0.5,0.2,0.4\n",
    )
    .unwrap();
    let out: serde_json::Value = serde_json::from_str(&ok(d, &["correlate", "--data", "copy.csv"])).unwrap();
    assert!((out[0]["r"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    fs::write(d.join("one.csv"), "HR,RA,RR,BI,FT,FPI\n0.1,0.5,0.2,0.9,0.3,0.1\n").unwrap();
    assert!(fails(d, &["correlate", "--data", "one.csv"]).contains("need ≥ 2 records"));
    fs::write(
        d.join("flat.csv"),
        "HR,RA,RR,BI,FT,FPI\n0.1,0.5,0.2,0.9,0.3,0.1\n0.7,0.5,0.4,0.1,0.8,0.7\n",
    )
    .unwrap();
    assert!(fails(d, &["correlate", "--data", "flat.csv"]).contains("RA"));
}

#[test]
fn invalid_config_is_rejected_before_work() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = generate(d, 40);
    let data = data.to_str().unwrap();
    fs::write(d.join("bad.json"), r#"{"train_ratio": 1.5}"#).unwrap();
    let err = fails(d, &["train", "--data", data, "--config", "bad.json", "--out", "m.json"]);
    assert!(err.contains("train ratio"), "{err}");
    assert!(!d.join("m.json").exists());

    // Flags win over the file.
    let err = fails(d, &["train", "--data", data, "--config", "bad.json", "--train-ratio", "0.0", "--out", "m.json"]);
    assert!(err.contains("got 0"), "{err}");
    fs::write(d.join("typo.json"), r#"{"l_candidate": [3]}"#).unwrap();
    assert!(fails(d, &["train", "--data", data, "--config", "typo.json", "--out", "m.json"]).contains("unknown field"));
}

#[test]
fn inputs_are_not_modified() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = generate(d, 60);
    let before = fs::read(&data).unwrap();
    ok(d, &["correlate", "--data", data.to_str().unwrap()]);
    ok(d, &["train", "--data", data.to_str().unwrap(), "--mode", "elm", "--out", "m.json"]);
    ok(d, &["evaluate", "--model", "m.json", "--data", data.to_str().unwrap()]);
    assert_eq!(before, fs::read(&data).unwrap());
}
