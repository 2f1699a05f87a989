//! CLI behavior: exit codes, file outputs, rendering, caching.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_unlearn")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn unlearn")
}

fn assert_code(out: &Output, code: i32, context: &str) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "{context}: stdout={} stderr={}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

struct Workspace {
    #[allow(dead_code)]
    dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().expect("tempdir");
        let root = dir.path().to_path_buf();
        Self { dir, root }
    }

    fn path(&self, name: &str) -> String {
        self.root.join(name).display().to_string()
    }

    /// Small dataset plus a trained checkpoint and a sweep report.
    fn with_pipeline(self) -> Self {
        let out = run(&[
            "generate", "--out", &self.path("data"), "--seed", "21", "--num-classes", "3",
            "--input-dim", "10", "--patients-per-class", "4", "--patients-test", "3",
            "--samples-per-patient", "6", "--edge-fraction", "0.25",
        ]);
        assert_code(&out, 0, "generate");
        let out = run(&[
            "train", "--data", &self.path("data/dataset.jsonl"), "--out", &self.path("model.ckpt"),
            "--hidden", "12", "--lr", "0.01", "--epochs", "12", "--seed", "2",
        ]);
        assert_code(&out, 0, "train");
        let out = run(&[
            "sweep", "--data", &self.path("data/dataset.jsonl"), "--out", &self.path("sweep.json"),
            "--hidden", "12", "--lr", "0.01", "--epochs", "12", "--seed", "2", "--workers", "4",
        ]);
        assert_code(&out, 0, "sweep");
        self
    }
}

#[test]
fn usage_errors_exit_one() {
    let out = run(&["forget", "--data"]);
    assert_code(&out, 1, "missing value");
    let out = run(&["no-such-command"]);
    assert_code(&out, 1, "unknown subcommand");
    let out = run(&["--help"]);
    assert_code(&out, 0, "help is not an error");
}

#[test]
fn missing_files_exit_three() {
    let ws = Workspace::new();
    let out = run(&[
        "eval", "--data", &ws.path("nope.jsonl"), "--checkpoint", &ws.path("nope.ckpt"),
    ]);
    assert_code(&out, 3, "missing dataset");
}

#[test]
fn generate_defaults_match_the_study_shape() {
    let ws = Workspace::new();
    let out = run(&["generate", "--out", &ws.path("d")]);
    assert_code(&out, 0, "generate defaults");
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("90 train / 10 test"), "{text}");
    // All-cluster manifest when the edge fraction is zero.
    let out = run(&["generate", "--out", &ws.path("e"), "--edge-fraction", "0"]);
    assert_code(&out, 0, "generate no edges");
    let manifest = std::fs::read_to_string(ws.root.join("e/manifest.json")).expect("manifest");
    assert!(!manifest.contains("Edge"), "manifest should contain no edge labels");
}

#[test]
fn eval_prints_requested_splits_and_patient_views() {
    let ws = Workspace::new().with_pipeline();
    let out = run(&[
        "eval", "--data", &ws.path("data/dataset.jsonl"), "--checkpoint", &ws.path("model.ckpt"),
        "--forget", "p000",
    ]);
    assert_code(&out, 0, "eval");
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("train "), "{text}");
    assert!(text.contains("test "), "{text}");
    assert!(text.contains("forget[p000]"), "{text}");
    assert!(text.contains("retain[p000]"), "{text}");
    // Unknown patient is a fatal error.
    let out = run(&[
        "eval", "--data", &ws.path("data/dataset.jsonl"), "--checkpoint", &ws.path("model.ckpt"),
        "--forget", "zzz",
    ]);
    assert_code(&out, 3, "unknown patient");
}

#[test]
fn sweep_report_is_well_formed_and_renders() {
    let ws = Workspace::new().with_pipeline();
    let sweep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.root.join("sweep.json")).unwrap())
            .unwrap();
    assert_eq!(sweep["kind"], "sweep");
    assert_eq!(sweep["schema_version"], 1);
    assert!(sweep["config"]["train"]["epochs"].is_number());
    let counts: Vec<u64> = sweep["histogram"]["counts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(counts.len(), 20);
    assert_eq!(counts.iter().sum::<u64>(), 12, "counts sum to patient count");

    let out = run(&["report", "--input", &ws.path("sweep.json"), "--out", &ws.path("plots")]);
    assert_code(&out, 0, "report sweep");
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("edge proportion"), "{text}");
    let hist = std::fs::read_to_string(ws.root.join("plots/histogram.tsv")).unwrap();
    assert_eq!(hist.lines().count(), 21, "header plus 20 bins");
    assert!(Path::new(&ws.path("plots/golden_records.tsv")).exists());
}

#[test]
fn forget_report_renders_with_golden_columns_and_curves() {
    let ws = Workspace::new().with_pipeline();
    let out = run(&[
        "forget", "--data", &ws.path("data/dataset.jsonl"), "--checkpoint", &ws.path("model.ckpt"),
        "--out", &ws.path("run.json"), "--patients", "auto", "--golden", &ws.path("sweep.json"),
        "--strength", "0.001", "--levels", "high", "--trials", "2", "--base-seed", "5",
    ]);
    assert_code(&out, 0, "forget with explicit strength");
    let run_file: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.root.join("run.json")).unwrap()).unwrap();
    assert_eq!(run_file["kind"], "forget");
    let rows = run_file["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4, "two auto patients x two methods");
    for row in rows {
        assert!(row["trials"].as_array().unwrap().len() == 2);
        assert!(row["mean"]["test_error"].is_number());
        assert!(row["trials"][0]["golden"]["golden_df_error"].is_number());
    }
    let out = run(&["report", "--input", &ws.path("run.json"), "--out", &ws.path("plots")]);
    assert_code(&out, 0, "report forget");
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("df"), "{text}");
    assert!(text.contains("test"), "{text}");
    assert!(text.contains("golden"), "{text}");
}

#[test]
fn calibrated_forget_records_traces_and_partial_failures_exit_two() {
    let ws = Workspace::new().with_pipeline();
    // Low on this small model saturates above the band for the edge
    // patient, so some cells fail while others succeed: exit code 2 and
    // error rows recorded, run continues.
    let out = run(&[
        "forget", "--data", &ws.path("data/dataset.jsonl"), "--checkpoint", &ws.path("model.ckpt"),
        "--out", &ws.path("run.json"), "--patients", "auto", "--golden", &ws.path("sweep.json"),
        "--levels", "low,high", "--trials", "1", "--base-seed", "5", "--workers", "2",
    ]);
    let code = out.status.code().unwrap();
    assert!(
        code == 0 || code == 2,
        "calibrated run: unexpected exit {code}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run_file: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.root.join("run.json")).unwrap()).unwrap();
    let rows = run_file["rows"].as_array().unwrap();
    let errors = rows.iter().filter(|r| r.get("error").is_some()).count();
    assert_eq!(code == 2, errors > 0, "exit 2 iff some cell failed");
    // Successful calibrated cells carry their probe trace.
    assert!(rows
        .iter()
        .filter(|r| r.get("error").is_none())
        .all(|r| r["calibration"]["trace"].as_array().is_some_and(|t| !t.is_empty())));
    // Rendering handles both kinds of row.
    let out = run(&["report", "--input", &ws.path("run.json"), "--out", &ws.path("plots")]);
    assert_code(&out, 0, "report");
    if errors > 0 {
        let text = String::from_utf8_lossy(&out.stdout).to_string();
        assert!(text.contains("failed cells"), "{text}");
    }
    // Plot data for calibrated cells.
    let curves = std::fs::read_dir(ws.root.join("plots"))
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("error_vs_strength-")
        })
        .count();
    assert!(curves > 0, "expected at least one error-vs-strength curve");
}

#[test]
fn fim_cache_is_keyed_to_the_checkpoint() {
    let ws = Workspace::new().with_pipeline();
    // Second checkpoint, different training seed: same shape, different
    // weights and hash.
    let out = run(&[
        "train", "--data", &ws.path("data/dataset.jsonl"), "--out", &ws.path("model2.ckpt"),
        "--hidden", "12", "--lr", "0.01", "--epochs", "12", "--seed", "3",
    ]);
    assert_code(&out, 0, "train second model");
    let forget = |ckpt: &str, out_name: &str, cache: Option<&str>| {
        let mut args = vec![
            "forget", "--data", ws_path(&ws, "data/dataset.jsonl"), "--checkpoint",
        ];
        let ckpt = ws.path(ckpt);
        let out_path = ws.path(out_name);
        args.push(Box::leak(ckpt.into_boxed_str()));
        args.push("--out");
        args.push(Box::leak(out_path.into_boxed_str()));
        args.extend_from_slice(&[
            "--patients", "p000", "--strength", "0.001", "--levels", "high", "--trials", "1",
            "--base-seed", "5",
        ]);
        if let Some(c) = cache {
            args.push("--fim-cache");
            args.push(Box::leak(ws.path(c).into_boxed_str()));
        }
        let out = run(&args);
        assert_code(&out, 0, "forget");
        strip_timings(&ws.root.join(out_name))
    };
    // Warm the cache with model 1, then run model 2 against the same cache
    // directory: the stale dumps must not be reused.
    let _warm = forget("model.ckpt", "r1.json", Some("cache"));
    let cached_m2 = forget("model2.ckpt", "r2.json", Some("cache"));
    let fresh_m2 = forget("model2.ckpt", "r3.json", None);
    assert_eq!(
        cached_m2, fresh_m2,
        "a cache warmed by another checkpoint must not change results"
    );
    // And the cache actually holds dumps.
    assert!(std::fs::read_dir(ws.root.join("cache")).unwrap().count() > 0);
}

fn ws_path(ws: &Workspace, name: &str) -> &'static str {
    Box::leak(ws.path(name).into_boxed_str())
}

fn strip_timings(path: &Path) -> String {
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("timings");
    serde_json::to_string_pretty(&v).unwrap()
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let ws = Workspace::new();
    std::fs::write(
        ws.root.join("config.json"),
        serde_json::json!({
            "synth": {
                "num_classes": 3, "input_dim": 9, "patients_per_class_train": 3,
                "patients_test": 3, "samples_per_patient": 5, "cluster_spread": 1.0,
                "sample_spread": 0.25, "edge_offset": 6.0, "edge_fraction": 0.0, "seed": 8
            }
        })
        .to_string(),
    )
    .unwrap();
    let cfg = ws.path("config.json");
    let out = run(&["generate", "--out", &ws.path("d"), "--config", &cfg]);
    assert_code(&out, 0, "generate from config");
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("9 train / 3 test"), "{text}");
    // A flag beats the file.
    let out = run(&[
        "generate", "--out", &ws.path("d2"), "--config", &cfg, "--patients-per-class", "4",
    ]);
    assert_code(&out, 0, "generate with override");
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("12 train / 3 test"), "{text}");
}

#[test]
fn relative_levels_scale_down_from_the_high_strength() {
    let ws = Workspace::new().with_pipeline();
    let out = run(&[
        "forget", "--data", &ws.path("data/dataset.jsonl"), "--checkpoint", &ws.path("model.ckpt"),
        "--out", &ws.path("rel.json"), "--patients", "p000",
        "--methods", "scrub", "--levels", "low,medium,high", "--trials", "1",
        "--base-seed", "5", "--relative-from-high",
    ]);
    let code = out.status.code().unwrap();
    assert!(code == 0 || code == 2, "relative run exit {code}");
    let run_file: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.root.join("rel.json")).unwrap()).unwrap();
    let rows = run_file["rows"].as_array().unwrap();
    let strength = |level: &str| -> Option<f64> {
        rows.iter()
            .find(|r| r["level"] == level && r.get("error").is_none())
            .and_then(|r| r["trials"][0]["strength"].as_f64())
    };
    if let (Some(low), Some(medium), Some(high)) =
        (strength("low"), strength("medium"), strength("high"))
    {
        assert!((low - 0.300 * high).abs() < 1e-12 * high);
        assert!((medium - 0.667 * high).abs() < 1e-12 * high);
    } else {
        panic!("relative rows missing: {rows:?}");
    }
}

#[test]
fn empty_report_renders_no_rows_and_exits_zero() {
    let ws = Workspace::new();
    let empty = serde_json::json!({
        "schema_version": 1,
        "kind": "forget",
        "tool_version": "0.1.0",
        "config": {},
        "rows": [],
        "timings": {}
    });
    std::fs::write(ws.root.join("empty.json"), empty.to_string()).unwrap();
    let out = run(&["report", "--input", &ws.path("empty.json")]);
    assert_code(&out, 0, "empty report");
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("no rows"), "{text}");
}
