use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SCALAR: &str = r#"{"kind":"scalar"}"#;
const POLY2_ONLY: &str = r#"{"weights":[{"kind":"poly","m":2}],"summable":0}"#;

fn wmalg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wmalg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn matrix(algebra: &str, entries: &[(usize, usize, &str)]) -> String {
    let entries: Vec<String> = entries
        .iter()
        .map(|(i, j, v)| format!(r#"{{"i":{i},"j":{j},"v":{v}}}"#))
        .collect();
    format!(r#"{{"algebra":{algebra},"entries":[{}]}}"#, entries.join(","))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(!stderr.trim_start().starts_with('{'), "stderr holds JSON: {stderr}");
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

#[test]
fn norm_of_single_entry() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "t.json", &matrix(SCALAR, &[(2, 3, "[1.0, 0.0]")]));
    let w = write(&dir, "w.json", POLY2_ONLY);
    let out = wmalg(&["--json", "--weights", s(&w), "norm", s(&m)]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["command"], "norm");
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["weights"]["weights"][0]["kind"], "poly");
    let n = &r["outputs"]["norms"][0];
    assert_eq!(n["value"], 9.0);
    assert_eq!(n["argmax"], serde_json::json!([2, 3]));
    assert_eq!(r["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn norm_of_empty_matrix_is_zero() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "t.json", &matrix(SCALAR, &[]));
    let out = wmalg(&["--json", "norm", s(&m)]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let norms = r["outputs"]["norms"].as_array().unwrap();
    assert_eq!(norms.len(), 3);
    assert!(norms.iter().all(|n| n["value"] == 0.0));
}

#[test]
fn duplicate_coordinate_exits_2() {
    let dir = TempDir::new().unwrap();
    let m = write(
        &dir,
        "t.json",
        &matrix(SCALAR, &[(1, 2, "[1,0]"), (1, 2, "[2,0]")]),
    );
    let out = wmalg(&["--json", "norm", s(&m)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("duplicate coordinate"), "{stderr}");
}

#[test]
fn malformed_file_reports_location() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "t.json", "{\"algebra\":\n  {\"kind\":\"scalar\"},,}");
    let out = wmalg(&["norm", s(&m)]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 2"), "{stderr}");
}

#[test]
fn missing_file_is_an_io_error() {
    let out = wmalg(&["norm", "/nonexistent/matrix.json"]);
    assert_eq!(out.status.code(), Some(8));
}

#[test]
fn overflowing_weight_exits_3() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "t.json", &matrix(SCALAR, &[(2000, 1, "[1,0]")]));
    let w = write(
        &dir,
        "w.json",
        r#"{"weights":[{"kind":"exp","base":2.0}],"summable":0}"#,
    );
    let out = wmalg(&["--weights", s(&w), "norm", s(&m)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn mul_writes_product_and_bounds_hold() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", &matrix(SCALAR, &[(1, 2, "[1,0]")]));
    let b = write(&dir, "b.json", &matrix(SCALAR, &[(2, 1, "[1,0]")]));
    let out_file = dir.path().join("p.json");
    let out = wmalg(&["--json", "--out", s(&out_file), "mul", s(&a), s(&b)]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    for row in r["outputs"]["weights"].as_array().unwrap() {
        assert_eq!(row["bound_satisfied"], true);
    }
    let product: Value = serde_json::from_str(&std::fs::read_to_string(&out_file).unwrap()).unwrap();
    let entries = product["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0]["i"], 1);
    assert_eq!(entries[0]["j"], 1);
    assert_eq!(entries[0]["v"], serde_json::json!([1.0, 0.0]));
}

#[test]
fn mul_by_zero_is_empty() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", &matrix(SCALAR, &[(3, 1, "[2,1]"), (1, 4, "[0,5]")]));
    let z = write(&dir, "z.json", &matrix(SCALAR, &[]));
    let out = wmalg(&["--json", "mul", s(&a), s(&z)]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["outputs"]["nnz"], 0);
    assert_eq!(r["outputs"]["matrix"]["entries"], serde_json::json!([]));
}

#[test]
fn mul_scalar_by_block_exits_4() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", &matrix(SCALAR, &[(1, 1, "[1,0]")]));
    let b = write(
        &dir,
        "b.json",
        &matrix(
            r#"{"kind":"block","k":2}"#,
            &[(1, 1, "[[1,0],[0,0],[0,0],[1,0]]")],
        ),
    );
    let out = wmalg(&["mul", s(&a), s(&b)]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn qinv_of_half() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "t.json", &matrix(SCALAR, &[(1, 1, "[0.5,0]")]));
    let w = write(&dir, "w.json", POLY2_ONLY);
    let out_file = dir.path().join("q.json");
    let out = wmalg(&[
        "--json", "--weights", s(&w), "--tol", "1e-12", "--oracle", "--out", s(&out_file), "qinv",
        s(&m),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let rho = r["outputs"]["rho"].as_f64().unwrap();
    assert!((rho - std::f64::consts::PI.powi(2) / 12.0).abs() < 1e-6, "{rho}");
    assert_eq!(r["outputs"]["oracle"]["poly(2)"]["within_tail"], true);

    let q: Value = serde_json::from_str(&std::fs::read_to_string(&out_file).unwrap()).unwrap();
    let v = q["entries"][0]["v"][0].as_f64().unwrap();
    assert!((v + 1.0).abs() < 1e-11, "{v}");

    let cert_path = dir.path().join("q.json.cert.json");
    let cert: Value = serde_json::from_str(&std::fs::read_to_string(cert_path).unwrap()).unwrap();
    assert!(cert["iterations"].as_u64().unwrap() > 0);
    assert!(cert["tails"]["poly(2)"].as_f64().unwrap() <= 1e-12);
    assert!(cert["residuals"]["poly(2)"]["left"].is_number());
}

#[test]
fn qinv_of_zero() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "t.json", &matrix(SCALAR, &[]));
    let out = wmalg(&["--json", "qinv", s(&m)]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["outputs"]["certificate"]["iterations"], 0);
    assert_eq!(r["outputs"]["matrix"]["entries"], serde_json::json!([]));
}

#[test]
fn qinv_outside_ball() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "t.json", &matrix(SCALAR, &[(1, 1, "[1,0]")]));
    let out = wmalg(&["qinv", s(&m)]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not certified; rho ="));

    let out = wmalg(&["--oracle", "qinv", s(&m)]);
    assert_eq!(out.status.code(), Some(6));
}

#[test]
fn qinv_oracle_beyond_ball() {
    // rho > 1 but 1 - t = -1 is invertible: q(2) = 1 - 1/(1 - 2) = 2.
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "t.json", &matrix(SCALAR, &[(1, 1, "[2,0]")]));
    let out = wmalg(&["--json", "--oracle", "qinv", s(&m)]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["outputs"]["method"], "oracle");
    let v = r["outputs"]["matrix"]["entries"][0]["v"][0].as_f64().unwrap();
    assert!((v - 2.0).abs() < 1e-12, "{v}");
}

#[test]
fn verify_with_no_cases_passes() {
    let dir = TempDir::new().unwrap();
    let out = wmalg(&["--json", "--out", s(&dir.path().join("r")), "verify", "--cases", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["failed"], 0);
    assert_eq!(r["seed"], 42);
    for p in r["outputs"]["properties"].as_array().unwrap() {
        assert_eq!(p["cases"], 0);
    }
}

#[test]
fn verify_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let run = || {
        let out = wmalg(&[
            "--json", "--seed", "7", "--out", s(&dir.path().join("r")), "verify", "--cases", "20",
        ]);
        assert_eq!(out.status.code(), Some(0));
        let mut r = report(&out);
        r.as_object_mut().unwrap().remove("timing_ms");
        r
    };
    assert_eq!(run(), run());
}

#[test]
fn bench_writes_csv() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = wmalg(&[
        "--json", "--out", s(&csv), "bench", "--sizes", "4,8", "--rho-grid", "0.1,0.5,0.9",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["failed"], 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("size,rho,terms_needed,wall_time_product,wall_time_qinv")
    );
    assert_eq!(lines.count(), 6);
}

#[test]
fn human_summary_without_json_flag() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "t.json", &matrix(SCALAR, &[(2, 3, "[1,0]")]));
    let out = wmalg(&["norm", s(&m)]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("at (2,3)"), "{stdout}");
    assert!(serde_json::from_str::<Value>(&stdout).is_err());
}

#[test]
fn unknown_flag_exits_2() {
    let out = wmalg(&["--no-such-flag", "norm", "x.json"]);
    assert_eq!(out.status.code(), Some(2));
}
