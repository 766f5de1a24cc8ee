//! End-to-end checks of the binary: exit codes, report shape, determinism,
//! and the stdin/stdout fixture pipeline.

use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_biconnect"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_with_stdin(args: &[&str], stdin: &[u8]) -> Output {
    use std::io::Write;
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary spawns");
    child.stdin.as_mut().unwrap().write_all(stdin).unwrap();
    child.wait_with_output().expect("binary finishes")
}

fn temp_path(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("biconnect-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn json(output: &[u8]) -> serde_json::Value {
    serde_json::from_slice(output).expect("stdout is a JSON report")
}

#[test]
fn example_pipes_into_pf() {
    let example = run(&["example", "--id", "example2"]);
    assert!(example.status.success());
    let pf = run_with_stdin(&["pf"], &example.stdout);
    assert!(pf.status.success());
    let report = json(&pf.stdout);
    let beta0 = report["beta0"].as_f64().unwrap();
    let beta1 = report["beta1"].as_f64().unwrap();
    assert!((beta0 - 1.931851653).abs() < 1e-8, "beta0 {beta0}");
    assert!((beta1 - 2.175327747).abs() < 1e-8, "beta1 {beta1}");
    assert_eq!(report["schema"], "biconnect.report/v1");
}

#[test]
fn pf_of_parallel_edge_fixture() {
    let example = run(&["example", "--id", "hadamard(4)"]);
    assert!(example.status.success());
    let pf = run_with_stdin(&["pf"], &example.stdout);
    assert!(pf.status.success());
    let report = json(&pf.stdout);
    assert!((report["beta0"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!((report["beta1"].as_f64().unwrap() - 4.0).abs() < 1e-10);
}

#[test]
fn validate_reports_warnings_but_passes() {
    let example = run(&["example", "--id", "hadamard(2)"]);
    let validate = run_with_stdin(&["validate"], &example.stdout);
    assert!(validate.status.success());
    let report = json(&validate.stdout);
    assert_eq!(report["pass"], true);
    assert_eq!(report["warned"], true);
}

#[test]
fn check_biunitary_exit_codes() {
    let fourier = run(&["example", "--id", "fourier(3)"]);
    assert!(fourier.status.success());
    let path = temp_path("fourier3.json");
    std::fs::write(&path, &fourier.stdout).unwrap();

    let pass = run(&["check-biunitary", path.to_str().unwrap()]);
    assert_eq!(pass.status.code(), Some(0));

    // Corrupt one value: clean fail, exit 1.
    let text = String::from_utf8(fourier.stdout.clone()).unwrap();
    let mut fixture: serde_json::Value = serde_json::from_str(&text).unwrap();
    fixture["values"][0]["re"] = serde_json::Value::from(0.9);
    let bad_path = temp_path("fourier3_bad.json");
    std::fs::write(&bad_path, serde_json::to_string(&fixture).unwrap()).unwrap();
    let fail = run(&["check-biunitary", bad_path.to_str().unwrap()]);
    assert_eq!(fail.status.code(), Some(1));
}

#[test]
fn malformed_json_is_exit_3_with_location() {
    let path = temp_path("broken.json");
    std::fs::write(&path, "{\"schema\": \"biconnect.connection/v1\",").unwrap();
    let out = run(&["check-biunitary", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("line"), "diagnostic should cite a location: {stderr}");
}

#[test]
fn theorem_verify_random_fields_fail_cleanly_and_agree() {
    let fourier = run(&["example", "--id", "fourier(2)"]);
    let path = temp_path("fourier2.json");
    std::fs::write(&path, &fourier.stdout).unwrap();
    let out = run(&[
        "theorem-verify",
        path.to_str().unwrap(),
        "--random",
        "5",
        "--seed",
        "11",
    ]);
    assert_eq!(out.status.code(), Some(1), "random fields: all four fail, agree");
    let report = json(&out.stdout);
    assert_eq!(report["any_disagreement"], false);
    assert_eq!(report["all_pass"], false);
    assert_eq!(report["seed"], 11);
    assert_eq!(report["samples"].as_array().unwrap().len(), 5);
}

#[test]
fn theorem_verify_identity_field_passes() {
    let fourier = run(&["example", "--id", "fourier(3)"]);
    let conn_path = temp_path("fourier3_for_field.json");
    std::fs::write(&conn_path, &fourier.stdout).unwrap();
    let field = serde_json::json!({
        "schema": "biconnect.field/v1",
        "graph": "G1",
        "coeffs": [
            {"rho1": 0, "rho2": 0, "re": 1.0, "im": 0.0},
            {"rho1": 1, "rho2": 1, "re": 1.0, "im": 0.0},
            {"rho1": 2, "rho2": 2, "re": 1.0, "im": 0.0}
        ]
    });
    let field_path = temp_path("identity_field.json");
    std::fs::write(&field_path, serde_json::to_string(&field).unwrap()).unwrap();
    let out = run(&[
        "theorem-verify",
        conn_path.to_str().unwrap(),
        "--field",
        field_path.to_str().unwrap(),
        "--tol",
        "1e-8",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out.stdout);
    assert_eq!(report["all_pass"], true);

    // The same field passes the finite-level action check.
    let action = run(&[
        "action-check",
        conn_path.to_str().unwrap(),
        "--field",
        field_path.to_str().unwrap(),
        "--tol",
        "1e-8",
    ]);
    assert_eq!(action.status.code(), Some(0));
}

#[test]
fn flat_fields_report_is_deterministic() {
    let fourier = run(&["example", "--id", "fourier(2)"]);
    let path = temp_path("fourier2_det.json");
    std::fs::write(&path, &fourier.stdout).unwrap();
    let a = run(&["flat-fields", path.to_str().unwrap()]);
    let b = run(&["flat-fields", path.to_str().unwrap()]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout, "reports must be byte-identical");
    let report = json(&a.stdout);
    assert_eq!(report["dimension"], 1);
}

#[test]
fn irreducible_and_direct_sum() {
    let fourier = run(&["example", "--id", "fourier(2)"]);
    let path = temp_path("fourier2_irr.json");
    std::fs::write(&path, &fourier.stdout).unwrap();

    let irr = run(&["irreducible", path.to_str().unwrap()]);
    assert_eq!(irr.status.code(), Some(0));
    assert_eq!(json(&irr.stdout)["self_intertwiner_dimension"], 1);

    let sum_path = temp_path("fourier2_sum.json");
    let dsum = run(&[
        "dsum",
        path.to_str().unwrap(),
        path.to_str().unwrap(),
        "--out",
        sum_path.to_str().unwrap(),
    ]);
    assert!(dsum.status.success());
    let red = run(&["irreducible", sum_path.to_str().unwrap()]);
    assert_eq!(red.status.code(), Some(1));
    assert_eq!(json(&red.stdout)["self_intertwiner_dimension"], 4);

    // The direct sum stays bi-unitary.
    let check = run(&["check-biunitary", sum_path.to_str().unwrap()]);
    assert_eq!(check.status.code(), Some(0));
}

#[test]
fn renorm_emits_a_loadable_biunitary_fixture() {
    let fourier = run(&["example", "--id", "fourier(3)"]);
    let path = temp_path("fourier3_renorm.json");
    std::fs::write(&path, &fourier.stdout).unwrap();
    let prime = run(&["renorm", "--mode", "prime", path.to_str().unwrap()]);
    assert!(prime.status.success());
    let check = run_with_stdin(&["check-biunitary"], &prime.stdout);
    assert_eq!(check.status.code(), Some(0));
}

#[test]
fn product_of_fixture_with_its_prime() {
    let fourier = run(&["example", "--id", "fourier(2)"]);
    let a_path = temp_path("prod_a.json");
    std::fs::write(&a_path, &fourier.stdout).unwrap();
    let prime = run(&["renorm", "--mode", "prime", a_path.to_str().unwrap()]);
    let b_path = temp_path("prod_b.json");
    std::fs::write(&b_path, &prime.stdout).unwrap();
    let prod = run(&["product", a_path.to_str().unwrap(), b_path.to_str().unwrap()]);
    assert!(prod.status.success());
    let check = run_with_stdin(&["check-biunitary"], &prod.stdout);
    assert_eq!(check.status.code(), Some(0));
}

#[test]
fn fixtures_env_var_resolves_relative_paths() {
    let dir = std::env::temp_dir().join(format!("biconnect-fixdir-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let fourier = run(&["example", "--id", "fourier(2)"]);
    std::fs::write(dir.join("via_env.json"), &fourier.stdout).unwrap();
    let out = bin()
        .args(["check-biunitary", "via_env.json"])
        .env("BICONNECT_FIXTURES", &dir)
        .current_dir(std::env::temp_dir())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn parallel_flag_does_not_change_results() {
    let fourier = run(&["example", "--id", "fourier(2)"]);
    let path = temp_path("fourier2_par.json");
    std::fs::write(&path, &fourier.stdout).unwrap();
    let seq = run(&["theorem-verify", path.to_str().unwrap(), "--random", "8", "--seed", "3"]);
    let par = run(&[
        "theorem-verify",
        path.to_str().unwrap(),
        "--random",
        "8",
        "--seed",
        "3",
        "--parallel",
    ]);
    assert_eq!(seq.status.code(), par.status.code());
    assert_eq!(seq.stdout, par.stdout);
}
