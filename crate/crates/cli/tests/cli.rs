use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_rieszgrad");

const PROBLEM: &str = r#"{
  "grid": {"n": 1, "N": 128, "L": 2.0},
  "omega": {"type": "box", "lower": [-0.5], "upper": [0.5]},
  "s": 0.5, "p": 2.0,
  "coefficient": {"kind": "scalar", "family": "power", "params": {"x0": [0.0], "alpha": 0.5}},
  "rhs": {"kind": "manufactured", "center": [0.05], "radius": 0.3},
  "solver": {"method": "cg", "tol": 1e-10}
}"#;

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn weights_half_power_is_four_thirds() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["weights", "--family", "power", "--alpha", "0.5", "--p", "2", "--levels", "8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let c = v["constant"].as_f64().unwrap();
    assert!((c - 4.0 / 3.0).abs() < 0.02 * 4.0 / 3.0, "{c}");
    assert_eq!(v["family"], "power");
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["command"], "weights");
    assert_eq!(m["artifacts"][0]["path"], "weights.json");
}

#[test]
fn malformed_config_exits_2_with_key_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, PROBLEM.replace(r#""tol": 1e-10"#, r#""tol": "tight""#)).unwrap();
    let o = run(dir.path(), &["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("solver.tol"), "{err}");

    std::fs::write(&cfg, PROBLEM.replace(r#""s": 0.5"#, r#""order": 0.5"#)).unwrap();
    let o = run(dir.path(), &["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("order"));
}

#[test]
fn invalid_parameters_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["weights", "--p", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    let o = run(dir.path(), &["solve", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solve_writes_report_solution_and_history() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("problem.json");
    std::fs::write(&cfg, PROBLEM).unwrap();
    let out = dir.path().join("run");
    let o = run(&out, &["solve", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("report.json"));
    assert_eq!(r["converged"], true);
    assert!(r["relative_error"].as_f64().unwrap() < 1e-8);
    let names: Vec<String> = json(&out.join("manifest.json"))["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["path"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(names, ["report.json", "solution.bin", "history.csv"]);
}

#[test]
fn grad_then_div_matches_minus_laplacian() {
    let dir = tempfile::tempdir().unwrap();
    let grid = rieszgrad::Grid::new(rieszgrad::GridSpec::centered(2, 32, 2.0)).unwrap();
    let bump = rieszgrad::grid::bump(&grid, &[0.1, -0.2], 0.4, 1.0)
        .and_then(|b| b.without_nyquist())
        .unwrap();
    let u = dir.path().join("u.bin");
    std::fs::write(&u, rieszgrad::io::field_bytes(&bump)).unwrap();
    let u = u.to_str().unwrap();
    assert!(run(dir.path(), &["op", "grad", "--input", u, "--output", "g.bin", "--s", "0.4"]).status.success());
    let g = dir.path().join("g.bin");
    assert!(run(dir.path(), &["op", "div", "--input", g.to_str().unwrap(), "--output", "d.bin", "--s", "0.4"])
        .status
        .success());
    assert!(run(dir.path(), &["op", "flap", "--input", u, "--output", "f.bin", "--sigma", "0.8"]).status.success());
    let read = |name: &str| rieszgrad::io::read_field_file(&dir.path().join(name)).unwrap();
    let d = read("d.bin");
    let f = read("f.bin");
    let err = d
        .values()
        .iter()
        .zip(f.values())
        .map(|(a, b)| (a + b).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-10 * f.max_abs(), "{err}");
    assert!(dir.path().join("g.bin.manifest.json").exists());

    let o = run(dir.path(), &["op", "riesz", "--input", u, "--output", "r.bin"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_is_keyed_by_case() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["sweep", "--what", "ap", "--p", "2,3", "--alpha", "0,0.5", "--points", "512"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&dir.path().join("sweep.json"));
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    let ids: Vec<&str> = rows.iter().map(|r| r["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["p=2,alpha=0", "p=2,alpha=0.5", "p=3,alpha=0", "p=3,alpha=0.5"]);
    assert!((rows[0]["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(dir.path().join("sweep.csv").exists());
}

#[test]
fn poincare_defaults_converge() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["poincare", "--points", "128"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&dir.path().join("poincare.json"));
    assert_eq!(v["estimate"]["converged"], true);
    assert_eq!(v["verdict"], "bounded");
}
