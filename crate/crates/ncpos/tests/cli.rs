use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn ncpos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncpos")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(path: &std::path::Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn factorize_positive_group_polynomial() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.json");
    let res = ncpos(&["factorize", "--poly", &data("z3_positive.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let v = json(&out);
    assert_eq!(v["format"], 1);
    assert_eq!(v["status"], "positive");
    assert!(v["count"].as_u64().unwrap() >= 1);
    assert!(v["coeff_residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn witness_for_negative_group_polynomial() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.json");
    let res = ncpos(&["witness", "--poly", &data("z3_negative.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 1);
    let v = json(&out);
    assert!((v["value"].as_f64().unwrap() + 0.5).abs() < 1e-6);
    assert!(v["unitary"]["value"].as_f64().unwrap() < -0.4);
}

#[test]
fn certify_on_interval() {
    let dir = tempfile::tempdir().unwrap();
    let pencil = data("interval_pencil.json");
    let out = dir.path().join("c.json");
    let res = ncpos(&["certify", "--poly", &data("two_minus_square.json"), "--pencil", &pencil, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let v = json(&out);
    assert_eq!(v["status"], "certified");
    assert!(v["residual"].as_f64().unwrap() <= 1e-6);
    assert_eq!(v["localizing"].as_array().unwrap().len(), 2);

    let res = ncpos(&["certify", "--poly", &data("half_minus_square.json"), "--pencil", &pencil, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 1);
    assert!(json(&out)["value"].as_f64().unwrap() < -1e-3);
}

#[test]
fn identical_invocations_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let res = ncpos(&["factorize", "--poly", &data("z3_positive.json"), "--seed", "7", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&res), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn input_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    let res = ncpos(&["factorize", "--poly", "/nonexistent/p.json", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 3);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"factors\": [3],\n \"coeff_dim\": 1,\n \"terms\": [{\"word\": [[1, 1]], \"re\": [[1.0, 2.0]]}]}").unwrap();
    let res = ncpos(&["factorize", "--poly", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 3);
    assert!(String::from_utf8_lossy(&res.stderr).contains("terms[0].re"));

    std::fs::write(&bad, "{\"factors\": [3],\n \"coeff_dim\": }").unwrap();
    let res = ncpos(&["factorize", "--poly", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 3);
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 2"));

    assert_eq!(code(&ncpos(&["factorize"])), 3);
    assert_eq!(code(&ncpos(&["certify", "--poly", &data("two_minus_square.json"), "--out", "x"])), 3);
    assert_eq!(code(&ncpos(&["witness", "--poly", &data("two_minus_square.json")])), 3);
}

#[test]
fn extract_check_and_matrix_dump() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("m.json");
    let res = ncpos(&["extract-check", "--g", "2", "--depth", "2", "--samples", "10", "--dump-matrix", dump.to_str().unwrap()]);
    assert_eq!(code(&res), 0);
    assert!(String::from_utf8_lossy(&res.stdout).contains("[ok]"));
    let v = json(&dump);
    assert_eq!(v["m"]["re"].as_array().unwrap().len(), 7);
    assert!(v["condition"].as_f64().unwrap().is_finite());
}

#[test]
fn sdpa_file_solver_delegates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.json");
    let res = ncpos(&["factorize", "--poly", &data("z3_positive.json"), "--solver", "sdpa-file", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 2);
    let text = std::fs::read_to_string(dir.path().join("f.dat-s")).unwrap();
    assert!(text.starts_with("3\n1\n-4\n"));
    assert_eq!(json(&out)["status"], "delegated");
}
