use std::path::Path;
use std::process::{Command, Output};

use timebin_hom::demos::{demo_json, golden_summary, DEMO_NAMES};

fn tbhom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tbhom"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn demos_reproduce_golden_summaries() {
    for name in DEMO_NAMES {
        let out = tbhom(&["demo", name, "--quiet"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(
            String::from_utf8(out.stdout).unwrap(),
            golden_summary(name).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn compiled_pattern_validates() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.json");
    let out = tbhom(&[
        "compile",
        "--target",
        "[-i,-i,1]/sqrt3",
        "--compensate-loss",
        "--out",
        path(&p),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        code(&tbhom(&[
            "validate",
            "--pattern",
            path(&p),
            "--window",
            "3"
        ])),
        0
    );
    // the pattern needs three bins
    assert_eq!(
        code(&tbhom(&[
            "validate",
            "--pattern",
            path(&p),
            "--window",
            "2"
        ])),
        1
    );
}

#[test]
fn compile_failures_map_to_exit_codes() {
    let infeasible = tbhom(&[
        "compile",
        "--target",
        "[1,1,1,1,1]/sqrt5",
        "--max-roundtrips",
        "2",
    ]);
    assert_eq!(code(&infeasible), 3);
    assert_eq!(code(&tbhom(&["compile", "--target", "1,1"])), 1);
    assert_eq!(code(&tbhom(&["compile", "--target", "[0,0]"])), 1);
}

#[test]
fn scan_writes_outputs_with_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.json");
    std::fs::write(&scenario, demo_json("fig2cd").unwrap()).unwrap();
    let out_dir = dir.path().join("out");
    let out = tbhom(&[
        "scan",
        "--scenario",
        path(&scenario),
        "--seed",
        "8",
        "--out",
        path(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["seed"], 8);
    assert!(out_dir.join("reference.csv").exists());

    // the written CSV feeds straight into `fit`
    let fit = tbhom(&["fit", "--input", path(&out_dir.join("full.csv"))]);
    assert_eq!(code(&fit), 0, "{}", String::from_utf8_lossy(&fit.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fit.stdout).unwrap();
    let v = report["visibility"].as_f64().unwrap();
    assert!((0.1..0.25).contains(&v), "{v}");
}

#[test]
fn scan_csv_to_stdout() {
    let out = tbhom(&["demo", "fig2a", "--format", "csv", "--quiet"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("subset,delay_s,"));
    // reference plus one subset, 41 delays each
    assert_eq!(text.lines().count(), 1 + 2 * 41);
}

#[test]
fn input_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&tbhom(&["scan", "--scenario", "/nonexistent/s.json"])),
        2
    );
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"name": "x", "colour": 1}"#).unwrap();
    assert_eq!(code(&tbhom(&["scan", "--scenario", path(&bad)])), 1);
    assert_eq!(code(&tbhom(&["validate", "--scenario", path(&bad)])), 1);
    assert_eq!(code(&tbhom(&["demo", "fig9"])), 1);
    assert_eq!(code(&tbhom(&["frobnicate"])), 1);
    assert_eq!(code(&tbhom(&["--help"])), 0);

    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "delay_s,counts_global\n0,abc\n").unwrap();
    assert_eq!(code(&tbhom(&["fit", "--input", path(&csv)])), 1);
}

#[test]
fn source_curve_calibrated() {
    let out = tbhom(&[
        "source-curve",
        "--calibrate",
        "0.802",
        "--n-max",
        "6",
        "--quiet",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("nbar,V"));
    let values: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 40);
    assert!(values.windows(2).all(|w| w[1] < w[0]));

    assert_eq!(code(&tbhom(&["source-curve", "--calibrate", "0.999"])), 3);
}
