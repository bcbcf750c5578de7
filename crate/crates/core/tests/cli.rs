use std::path::{Path, PathBuf};
use std::process::Command;

use lshj_core::io::{read_field_csv, FieldTable};
use lshj_core::ScalarField;
use serde_json::Value;

fn lshj(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_lshj"))
        .args(args)
        .env("LSHJ_THREADS", "1")
        .output()
        .expect("run lshj");
    let text = String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap_or(-1), text)
}

fn p(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (p(dir.path(), "a.csv"), p(dir.path(), "b.csv"));
    for out in [&a, &b] {
        let (code, msg) = lshj(&["gen", "--density", "circle", "--n", "500", "--dim", "2", "--k", "10", "--seed", "3", "--out", s(out)]);
        assert_eq!(code, 0, "{msg}");
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let manifest = json(&a.with_extension("json"));
    assert_eq!(manifest["n"], 500);
    assert_eq!(manifest["seed"], 3);
    assert!(manifest["boundary_nodes"].as_u64().unwrap() > 0);
}

#[test]
fn grid_manifest_records_angular_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "g.csv");
    let rep = p(dir.path(), "g.json");
    let (code, msg) = lshj(&["gen", "--grid", "64x64", "--stencil", "ring:32", "--out", s(&out), "--report", s(&rep)]);
    assert_eq!(code, 0, "{msg}");
    let m = json(&rep);
    assert_eq!(m["n"], 4096);
    let dtheta = m["dtheta"].as_f64().unwrap();
    assert!(dtheta > 0.0 && dtheta < 0.2, "dtheta {dtheta}");
}

#[test]
fn solve_compare_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let field = p(dir.path(), "u.csv");
    let rep = p(dir.path(), "u.json");
    let base = ["solve", "--hamiltonian", "tukey", "--density", "square", "--grid", "32x32", "--stencil", "ring:16"];
    let mut args = base.to_vec();
    args.extend(["--out", s(&field), "--report", s(&rep)]);
    let (code, msg) = lshj(&args);
    assert_eq!(code, 0, "{msg}");
    let r = json(&rep);
    assert_eq!(r["converged"], true);
    assert_eq!(r["seed"], 7);
    assert!(r["final_residual"].as_f64().unwrap() <= 3e-3);
    assert_eq!(r["residuals"].as_array().unwrap().len(), r["iterations"].as_u64().unwrap() as usize + 1);

    // Identical fields compare to zero.
    let diff = p(dir.path(), "d.csv");
    let drep = p(dir.path(), "d.json");
    let (code, msg) = lshj(&["compare", "--a", s(&field), "--b", s(&field), "--out", s(&diff), "--report", s(&drep)]);
    assert_eq!(code, 0, "{msg}");
    assert_eq!(json(&drep)["l1"].as_f64().unwrap(), 0.0);

    // A uniform shift of 0.01 shows up exactly in both norms.
    let t = read_field_csv(&field).unwrap();
    let shifted = FieldTable {
        points: t.points.clone(),
        values: ScalarField::new(t.values.iter().map(|v| v + 0.01).collect()).unwrap(),
    };
    let b = p(dir.path(), "shift.csv");
    shifted.write(&b).unwrap();
    let (code, msg) = lshj(&["compare", "--a", s(&field), "--b", s(&b), "--out", s(&diff), "--report", s(&drep)]);
    assert_eq!(code, 0, "{msg}");
    let d = json(&drep);
    assert!((d["l1"].as_f64().unwrap() - 0.01).abs() < 1e-12);
    assert!((d["linf"].as_f64().unwrap() - 0.01).abs() < 1e-12);

    // Against the brute-force depth oracle.
    let (code, msg) = lshj(&["compare", "--a", s(&field), "--oracle", "tukey:square", "--out", s(&diff), "--report", s(&drep)]);
    assert_eq!(code, 0, "{msg}");
    assert!(json(&drep)["l1"].as_f64().unwrap() < 1e-2);

    // Hitting the sweep cap exits 1 and still writes the report.
    let mut args = base.to_vec();
    args.extend(["--max-sweeps", "2", "--out", s(&field), "--report", s(&rep)]);
    let (code, _) = lshj(&args);
    assert_eq!(code, 1);
    assert_eq!(json(&rep)["stop_reason"], "max_sweeps");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = p(dir.path(), "cfg.json");
    std::fs::write(&cfg, r#"{"hamiltonian": "eikonal", "grid": "16x16", "stencil": "5", "eps": 0.1, "tol": 0.5}"#).unwrap();
    let rep = p(dir.path(), "r.json");
    let out = p(dir.path(), "u.csv");
    let (code, msg) = lshj(&["solve", "--config", s(&cfg), "--tol", "0.01", "--out", s(&out), "--report", s(&rep)]);
    assert_eq!(code, 0, "{msg}");
    let r = json(&rep);
    assert_eq!(r["config"]["tol"].as_f64().unwrap(), 0.01);
    assert_eq!(r["config"]["stencil"], "5");
    assert_eq!(r["n"], 256);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = p(dir.path(), "bad.json");
    std::fs::write(&cfg, r#"{"hamiltonain": "eikonal"}"#).unwrap();
    assert_eq!(lshj(&["solve", "--config", s(&cfg)]).0, 2);
    assert_eq!(lshj(&["bench", "--suite", ""]).0, 2);
    assert_eq!(lshj(&["bench", "--suite", "nope"]).0, 2);
    assert_eq!(lshj(&["solve", "--hamiltonian", "nope", "--grid", "8x8"]).0, 2);
    assert_eq!(lshj(&["frobnicate"]).0, 2);
}

#[test]
fn bench_writes_a_row_per_case() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "bench.csv");
    let (code, msg) = lshj(&["bench", "--suite", "tukey-grid", "--sizes", "32", "--out", s(&out)]);
    assert_eq!(code, 0, "{msg}");
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("suite,case,size"));
    assert_eq!(lines.count(), 3);
}
