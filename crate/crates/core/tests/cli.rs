use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn scsl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scsl"))
        .args(args)
        .current_dir(dir)
        .env("SCSL_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path
}

fn run(dir: &Path, verb: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![verb, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    scsl(&args, dir)
}

fn generate(dir: &Path, out: &str, p: usize, m: usize, n: usize) -> PathBuf {
    let cfg = write_config(
        dir,
        &format!("gen_{out}.json"),
        &json!({"seed": 7, "generate": {"mode": "synthetic", "p": p, "m": m, "n": n, "conf_p": 0.4}}),
    );
    let out = dir.join(out);
    let o = run(dir, "generate", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn generate_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = generate(tmp.path(), "a", 5, 5, 2000);
    let b = generate(tmp.path(), "b", 5, 5, 2000);
    for f in ["X.csv", "Y.csv", "truth.json"] {
        let fa = fs::read(a.join(f)).unwrap();
        assert!(!fa.is_empty());
        assert_eq!(fa, fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let x = fs::read_to_string(a.join("X.csv")).unwrap();
    assert_eq!(x.lines().count(), 2001);
    let truth: Value = serde_json::from_str(&fs::read_to_string(a.join("truth.json")).unwrap()).unwrap();
    assert_eq!(truth["seed"], 7);
}

#[test]
fn generate_rejects_bad_conf_p_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &json!({"seed": 7, "generate": {"conf_p": 1.5}}));
    let o = run(tmp.path(), "generate", &cfg, &tmp.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line") && err.contains("conf_p"), "{err}");
}

#[test]
fn real_confounding_needs_y_input() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &json!({"seed": 1, "generate": {"mode": "real_confounding"}}));
    let o = run(tmp.path(), "generate", &cfg, &tmp.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("y_input"));
}

#[test]
fn real_confounding_from_files() {
    let tmp = tempfile::tempdir().unwrap();
    let src = generate(tmp.path(), "src", 4, 6, 500);
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &json!({"seed": 3, "generate": {
            "mode": "real_confounding", "p": 4, "m": 3,
            "x_input": src.join("X.csv"), "y_input": src.join("Y.csv")
        }}),
    );
    let out = tmp.path().join("o");
    let o = run(tmp.path(), "generate", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let y = fs::read_to_string(out.join("Y.csv")).unwrap();
    assert_eq!(y.lines().next().unwrap(), "y1,y2,y3");
    assert_eq!(y.lines().count(), 501);
}

#[test]
fn schema_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, v) in [
        ("noseed.json", json!({"generate": {}})),
        ("unknown.json", json!({"seed": 1, "generate": {"bogus": 1}})),
        ("noblock.json", json!({"seed": 1})),
    ] {
        let cfg = write_config(tmp.path(), name, &v);
        let o = run(tmp.path(), "generate", &cfg, &tmp.path().join("o"), &[]);
        assert_eq!(o.status.code(), Some(2), "{name}");
    }
    let o = scsl(&["generate"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

fn discover_cfg(data: &Path, extra: Value) -> Value {
    let mut block = json!({
        "x_input": data.join("X.csv"),
        "y_input": data.join("Y.csv"),
    });
    for (k, v) in extra.as_object().unwrap() {
        block[k] = v.clone();
    }
    json!({"seed": 11, "discover": block})
}

#[test]
fn discover_writes_reports_and_is_worker_invariant() {
    let tmp = tempfile::tempdir().unwrap();
    let data = generate(tmp.path(), "d", 5, 5, 2000);
    let cfg = write_config(tmp.path(), "disc.json", &discover_cfg(&data, json!({"marginal": true})));
    let (o1, o8) = (tmp.path().join("w1"), tmp.path().join("w8"));
    let a = run(tmp.path(), "discover", &cfg, &o1, &["--workers", "1"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = run(tmp.path(), "discover", &cfg, &o8, &["--workers", "8"]);
    assert!(b.status.success());

    let report: Value = serde_json::from_str(&fs::read_to_string(o1.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["edge_results"].as_array().unwrap().len(), 25);
    assert_eq!(report["n_trainings"], 10);
    assert_eq!(fs::read(o1.join("p_matrix.csv")).unwrap(), fs::read(o8.join("p_matrix.csv")).unwrap());
    assert_eq!(fs::read(o1.join("report.json")).unwrap(), fs::read(o8.join("report.json")).unwrap());
    let csv = fs::read_to_string(o1.join("p_matrix.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x,y1,y2,y3,y4,y5");
    assert!(o1.join("timing.json").exists());
    assert!(o1.join("marginal_p_matrix.csv").exists());
    assert_eq!(fs::read_dir(o1.join("models")).unwrap().count(), 10);
}

#[test]
fn discover_traces_and_edge_filter() {
    let tmp = tempfile::tempdir().unwrap();
    let data = generate(tmp.path(), "d", 3, 4, 400);
    let extra = json!({
        "edge_filter": [[0, 1], [2, 3]],
        "search": {"trace": true, "alpha_stop": null, "q1": 20, "q2": 5},
        "train": {"n_epochs": 5},
        "save_models": false,
    });
    let cfg = write_config(tmp.path(), "disc.json", &discover_cfg(&data, extra));
    let out = tmp.path().join("o");
    let o = run(tmp.path(), "discover", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("p_matrix.csv")).unwrap();
    assert_eq!(csv.matches("NA").count(), 10);
    let traces = fs::read_to_string(out.join("traces.jsonl")).unwrap();
    let first: Value = serde_json::from_str(traces.lines().next().unwrap()).unwrap();
    assert!(first["subset"].is_string() && first["T"].is_number());
    assert!(!out.join("models").exists());
}

#[test]
fn exhaustive_guard_and_force() {
    let tmp = tempfile::tempdir().unwrap();
    let data = generate(tmp.path(), "d", 2, 12, 200);
    let extra = json!({"search": {"mode": "exhaustive"}, "edge_filter": [[0, 0]], "train": {"n_epochs": 2}});
    let cfg = write_config(tmp.path(), "disc.json", &discover_cfg(&data, extra));
    let o = run(tmp.path(), "discover", &cfg, &tmp.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("2048"), "{err}");
    let o = run(tmp.path(), "discover", &cfg, &tmp.path().join("o"), &["--force"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn discover_missing_input_is_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "disc.json", &discover_cfg(&tmp.path().join("nothing"), json!({})));
    let o = run(tmp.path(), "discover", &cfg, &tmp.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_empty_grid_and_duplicate_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "b.json", &json!({"seed": 1, "bench": {}}));
    let out = tmp.path().join("o");
    let o = run(tmp.path(), "bench", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary, "mode,conf_p,n,n_x,n_y,f1,wall_seconds,failed_seeds\n");

    let cfg = write_config(tmp.path(), "d.json", &json!({"seed": 1, "bench": {"seeds": [1, 2, 1]}}));
    let o = run(tmp.path(), "bench", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_small_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "b.json",
        &json!({"seed": 1, "bench": {
            "mode": "real_confounding", "n": [300], "sizes": [[3, 3]], "seeds": [1, 2],
            "train": {"n_epochs": 5}
        }}),
    );
    let out = tmp.path().join("o");
    let o = run(tmp.path(), "bench", &cfg, &out, &["--workers", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(summary.lines().nth(1).unwrap().starts_with("real_confounding,0,300,3,3,"));
    assert_eq!(fs::read_to_string(out.join("metrics.jsonl")).unwrap().lines().count(), 2);
}

#[test]
fn trace_exports_all_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = generate(tmp.path(), "d", 3, 5, 300);
    let cfg = write_config(
        tmp.path(),
        "t.json",
        &json!({"seed": 2, "trace": {
            "x_input": data.join("X.csv"), "y_input": data.join("Y.csv"),
            "edge_filter": [[1, 2]], "train": {"n_epochs": 5},
            "search": {"q": 30, "q1": 10, "q2": 5, "alpha_stop": null}
        }}),
    );
    let out = tmp.path().join("o");
    let o = run(tmp.path(), "trace", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines: Vec<Value> = fs::read_to_string(out.join("traces.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    for mode in ["gso", "hybrid", "naive_random"] {
        assert!(lines.iter().any(|l| l["mode"] == mode), "{mode}");
    }
    assert!(lines.iter().all(|l| l["rank"].as_u64().is_some_and(|r| (1..=16).contains(&r))));
}
