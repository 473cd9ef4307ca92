use std::fs;
use std::process::{Command, Output};

fn semistable(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semistable")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn exponents_table() {
    let text = stdout(&semistable(&["exponents", "--n", "3,10,11", "--alpha", "0"]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,alpha,gamma,s_alpha,hardy,p_sobolev,p_jl,regime");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].ends_with(",critical"));
    assert!(lines[3].contains("-0.33772233983162"));
}

#[test]
fn family_summary_json() {
    let text = stdout(&semistable(&["family", "--kind", "power", "--n", "11", "--g", "gamma"]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["stability"]["verdict"], "semi_stable");
    assert_eq!(v["in_h1"], true);
    assert!(v["max_relative_residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn solve_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sol.csv");
    let json = dir.path().join("sol.json");
    let out = semistable(&[
        "solve", "--n", "3", "--lambda", "1",
        "--csv", csv.to_str().unwrap(), "--json", json.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(&csv).unwrap().lines().count() > 2000);
    let text = stdout(&semistable(&[
        "verify", "--solution-csv", csv.to_str().unwrap(), "--solution-json", json.to_str().unwrap(),
        "--check", "theorem,prop-2-4",
    ]));
    let reports: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 2);
    assert_eq!(reports[0]["target"], "theorem_i");
    assert!(reports.as_array().unwrap().iter().all(|r| r["verdict"] == true));
}

#[test]
fn unstable_subject_is_refused() {
    let out = semistable(&["verify", "--kind", "power", "--n", "11", "--g", "gamma", "--shift", "-0.5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not certified semi-stable"));
}

#[test]
fn sweep_is_reproducible_and_honours_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"grid": {"n": [10, 11, 12], "alpha": [0]},
            "subjects": [{"kind": "power", "g": "gamma"}],
            "checks": ["exponents", "theorem", "prop_2_6"],
            "output_dir": "ignored"}"#,
    )
    .unwrap();
    let mut csvs = Vec::new();
    for (name, workers) in [("a", "1"), ("b", "3")] {
        let out_dir = dir.path().join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_semistable"))
            .args(["sweep", "--config", cfg.to_str().unwrap(), "--output-dir", out_dir.to_str().unwrap()])
            .env("SEMISTABLE_WORKERS", workers)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("sweep.json")).unwrap()).unwrap();
        assert_eq!(json["schema_version"], 1);
        csvs.push(fs::read(out_dir.join("sweep.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(String::from_utf8_lossy(&csvs[0]).lines().count(), 1 + 3 + 6);
}

#[test]
fn empty_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"grid": {"n": [], "alpha": [0]}, "checks": ["exponents"], "output_dir": "x"}"#).unwrap();
    let out = semistable(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid must be non-empty"));
}

#[test]
fn plotdata_rows() {
    let text = stdout(&semistable(&["plotdata", "--kind", "gelfand-log", "--n", "10", "--points", "16"]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 17);
    assert!(lines[0].starts_with("r,u,u_r,weight,hardy_ratio"));
    let last: Vec<f64> = lines[16].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[0], 1.0);
    assert!((last[4] - 1.0).abs() < 1e-12);
}
