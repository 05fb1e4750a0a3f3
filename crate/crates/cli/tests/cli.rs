use std::process::{Command, Output};

use oscone::opsys::builtin;
use oscone::tensor::TensorElement;
use serde_json::Value;
use tempfile::TempDir;

fn oscone(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oscone"))
        .args(args)
        .env_remove("OSCONE_TOL")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}); stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn unit_file(dir: &TempDir, name: &str, system: &str, scale: f64) -> String {
    let s = builtin(system).unwrap();
    let u = TensorElement::unit(s.clone(), s, 1).scale(scale);
    write(dir, name, &serde_json::to_string(&u).unwrap())
}

fn save(dir: &TempDir, name: &str, out: &Output) -> String {
    write(dir, name, std::str::from_utf8(&out.stdout).unwrap())
}

fn verify(path: &str) -> Output {
    oscone(&["verify", path])
}

#[test]
fn unit_is_in_max_cone_and_verifies() {
    let dir = TempDir::new().unwrap();
    let u = unit_file(&dir, "u.json", "Mn:2", 1.0);
    let out = oscone(&["membership", "--cone", "max", &u]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["outcome"], "Member");
    assert_eq!(report["result"]["verdict"]["verdict"], "Member");
    assert_eq!(report["inputs"][0]["sha256"].as_str().unwrap().len(), 64);

    let saved = save(&dir, "report.json", &out);
    let v = verify(&saved);
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stdout));
    assert_eq!(json(&v)["outcome"], "Verified");
}

#[test]
fn negative_unit_is_not_in_min_cone() {
    let dir = TempDir::new().unwrap();
    let u = unit_file(&dir, "u.json", "Mn:2", -1.0);
    let out = oscone(&["membership", "--cone", "min", &u]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["outcome"], "NonMember");
    let eig = report["result"]["verdict"]["data"]["min_eigenvalue"].as_f64().unwrap();
    assert!((eig + 1.0).abs() < 1e-12);
    assert_eq!(verify(&save(&dir, "r.json", &out)).status.code(), Some(0));
}

#[test]
fn witness_pairing_for_scaled_negative_unit() {
    let dir = TempDir::new().unwrap();
    let u = unit_file(&dir, "u.json", "Cn:2", -2.0);
    let out = oscone(&["membership", "--cone", "max", "--eps", "1", &u]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["outcome"], "NonMember");
    let pairing = report["result"]["verdict"]["data"]["pairing_value"].as_f64().unwrap();
    assert!((pairing + 1.0).abs() < 1e-12, "{pairing}");
    assert_eq!(verify(&save(&dir, "r.json", &out)).status.code(), Some(0));
}

#[test]
fn diagonal_algebra_is_nuclear() {
    let dir = TempDir::new().unwrap();
    let out = oscone(&["nuclearity", "Cn:2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["outcome"], "Member");
    assert_eq!(verify(&save(&dir, "r.json", &out)).status.code(), Some(0));
}

#[test]
fn corrupted_certificate_is_rejected() {
    let dir = TempDir::new().unwrap();
    let u = unit_file(&dir, "u.json", "Mn:2", 1.0);
    let out = oscone(&["membership", "--cone", "max", &u]);
    let mut report = json(&out);
    let entry = &mut report["result"]["verdict"]["data"]["p"]["coeffs"][0][0];
    *entry = Value::from(entry.as_f64().unwrap() + 1.0);
    let bad = write(&dir, "bad.json", &serde_json::to_string_pretty(&report).unwrap());
    let v = verify(&bad);
    assert_eq!(v.status.code(), Some(1));
    assert_eq!(json(&v)["outcome"], "Rejected");
}

#[test]
fn factorize_reports_composition_errors() {
    let dir = TempDir::new().unwrap();
    let u = unit_file(&dir, "u.json", "Mn:2", 1.0);
    let out = oscone(&["factorize", &u]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    let data = &report["result"]["verdict"]["data"];
    for key in ["k", "epsilon", "composition_error_on_dual_basis", "certificate"] {
        assert!(!data[key].is_null(), "missing {key}");
    }
    let errors = data["composition_error_on_dual_basis"].as_array().unwrap();
    assert_eq!(errors.len(), 4);
    assert!(errors.iter().all(|e| e.as_f64().unwrap() <= 1e-5));
    assert_eq!(verify(&save(&dir, "r.json", &out)).status.code(), Some(0));
}

#[test]
fn norm_bracket_of_unit() {
    let dir = TempDir::new().unwrap();
    let u = unit_file(&dir, "u.json", "Cn:2", 1.0);
    let out = oscone(&["norm", "--width", "1e-3", &u]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    let b = &report["result"]["bracket"];
    let (lo, hi) = (b["lo"].as_f64().unwrap(), b["hi"].as_f64().unwrap());
    assert!(lo <= 1.0 && 1.0 <= hi && hi - lo <= 1e-3, "[{lo}, {hi}]");
    assert_eq!(verify(&save(&dir, "r.json", &out)).status.code(), Some(0));
}

#[test]
fn define_realize_and_schur() {
    let dir = TempDir::new().unwrap();
    let spec = r#"{"name": "xy", "ambient_dim": 2,
        "generators": [{"rows": 2, "cols": 2, "entries": [[0,0],[1,0],[0,0],[0,0]]}]}"#;
    let path = write(&dir, "spec.json", spec);
    let out = oscone(&["define", &path]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    // E12 and its adjoint give I, σx and σy
    assert_eq!(report["result"]["system"]["basis"].as_array().unwrap().len(), 3);

    let u = unit_file(&dir, "u.json", "Cn:2", 1.0);
    let out = oscone(&["realize", &u]);
    let r = &json(&out)["result"]["realization"];
    assert_eq!(r["rows"], 4);
    assert_eq!(verify(&save(&dir, "r.json", &out)).status.code(), Some(0));

    let x = r#"{"system": "Mn:2", "size": 1, "coeffs": [[1,0],[0,0],[0,0],[0,0]]}"#;
    let out = oscone(&["schur", x, x]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["result"]["product"]["level"], 1);
}

fn strip_wall_time(out: &Output) -> String {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .filter(|l| !l.contains("\"wall_time_seconds\""))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn reports_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let u = unit_file(&dir, "u.json", "pauli-xz", 1.0);
    let a = oscone(&["membership", "--cone", "max", "--seed", "7", &u]);
    let b = oscone(&["membership", "--cone", "max", "--seed", "7", &u]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(strip_wall_time(&a), strip_wall_time(&b));
}

#[test]
fn batch_keeps_input_order() {
    let dir = TempDir::new().unwrap();
    let pos = unit_file(&dir, "pos.json", "Cn:2", 1.0);
    let neg = unit_file(&dir, "neg.json", "Cn:2", -1.0);
    let queries = serde_json::json!([
        ["membership", "--cone", "max", &pos],
        ["membership", "--cone", "min", &neg],
        ["nuclearity", "Cn:2"],
        ["membership", "--cone", "max", "missing.json"],
    ]);
    let q = write(&dir, "q.json", &queries.to_string());
    let out = oscone(&["batch", "--jobs", "3", &q]);
    assert_eq!(out.status.code(), Some(1));
    let entries = json(&out);
    let entries = entries.as_array().unwrap();
    assert_eq!(entries.len(), 4);
    let outcomes: Vec<&str> = entries[..3]
        .iter()
        .map(|e| e["report"]["outcome"].as_str().unwrap())
        .collect();
    assert_eq!(outcomes, ["Member", "NonMember", "Member"]);
    assert_eq!(entries[3]["exit_code"], 1);
    assert!(entries[3]["error"].as_str().unwrap().contains("missing.json"));
    for (i, e) in entries.iter().enumerate() {
        assert_eq!(e["index"], i);
    }
}

#[test]
fn malformed_input_reports_position() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "bad.json", "{\n  \"left\": \"Mn:2\",\n  \"right\": ,\n}");
    let out = oscone(&["membership", "--cone", "min", &path]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:3:"), "{err}");
}

#[test]
fn invalid_parameters_are_errors() {
    let dir = TempDir::new().unwrap();
    let u = unit_file(&dir, "u.json", "Cn:2", 1.0);
    for args in [
        vec!["membership", "--cone", "max", "--tol=0", u.as_str()],
        vec!["membership", "--cone", "max", "--eps=-1", u.as_str()],
        vec!["membership", "--cone", "max", "--kmax", "0", u.as_str()],
        vec!["nuclearity", "Zz:9"],
        vec!["membership", u.as_str()],
    ] {
        assert_eq!(oscone(&args).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn tolerance_from_environment() {
    let dir = TempDir::new().unwrap();
    let u = unit_file(&dir, "u.json", "Cn:2", 1.0);
    let out = Command::new(env!("CARGO_BIN_EXE_oscone"))
        .args(["membership", "--cone", "min", &u])
        .env("OSCONE_TOL", "1e-6")
        .output()
        .unwrap();
    assert_eq!(json(&out)["parameters"]["tol"], 1e-6);
}
