//! End-to-end checks of the binary: exit codes, file outputs, diagnostics
//! and reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nsoskit"))
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nsoskit-cli-test-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_json(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn analyze_reports_response_time() {
    let out = bin()
        .args(["analyze", "--scenario"])
        .arg(repo_file("scenarios/nsos_single_domain.json"))
        .arg("--allocation")
        .arg(repo_file("scenarios/allocation_single_domain.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    let total = report["total_response_time"].as_f64().unwrap();
    assert!(total > 0.0 && total < 0.002, "unexpected response time {total}");
    assert_eq!(report["per_entity"].as_array().unwrap().len(), 9);
}

#[test]
fn analyze_total_matches_library_exactly() {
    let scenario: nsoskit::nsos::NsosScenario = serde_json::from_str(
        &std::fs::read_to_string(repo_file("scenarios/nsos_single_domain.json")).unwrap(),
    )
    .unwrap();
    let cores = vec![4, 2, 0, 4, 3, 2, 3, 2, 2];
    let allocation = nsoskit::nsos::Allocation::balanced(&scenario, &cores).unwrap();
    let expected = nsoskit::nsos::response_time(&scenario, &allocation).unwrap().total;

    let out = bin()
        .args(["analyze", "--scenario"])
        .arg(repo_file("scenarios/nsos_single_domain.json"))
        .arg("--allocation")
        .arg(repo_file("scenarios/allocation_single_domain.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    // The bundled allocation file encodes exactly these core counts, so
    // the reported total must round-trip bit-for-bit.
    let total = report["total_response_time"].as_f64().unwrap();
    assert_eq!(total.to_bits(), expected.to_bits());
}

#[test]
fn analyze_rejects_saturated_allocation_with_exit_2() {
    let dir = tmp_dir("saturated");
    // One core on the GO cannot take 3 * 5000 messages per second.
    let alloc = write_json(
        &dir,
        "alloc.json",
        r#"{"entities": [
            {"kind": "GO", "cores": 1}, {"kind": "SAE", "cores": 1},
            {"kind": "DSO", "domain": 1, "cores": 3},
            {"kind": "DSNFVO", "domain": 1, "cores": 2},
            {"kind": "DSVIM", "domain": 1, "cores": 1},
            {"kind": "DSRRO", "domain": 1, "cores": 2},
            {"kind": "DSeNBs", "domain": 1, "cores": 1},
            {"kind": "DSSDNC", "domain": 1, "cores": 1}
        ]}"#,
    );
    let out = bin()
        .args(["analyze", "--scenario"])
        .arg(repo_file("scenarios/nsos_single_domain.json"))
        .arg("--allocation")
        .arg(&alloc)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("GO"), "diagnostic does not name the entity: {err}");
}

#[test]
fn analyze_supports_csv_format() {
    let out = bin()
        .args(["analyze", "--scenario"])
        .arg(repo_file("scenarios/nsos_single_domain.json"))
        .arg("--allocation")
        .arg(repo_file("scenarios/allocation_single_domain.json"))
        .args(["--format", "csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let body = stdout_of(&out);
    assert!(body.starts_with("entity,instance,cores,rate"));
    assert_eq!(body.trim_end().lines().count(), 9, "8 nodes plus header");
}

#[test]
fn malformed_scenario_is_an_input_error() {
    let dir = tmp_dir("malformed");
    let bad = write_json(&dir, "bad.json", r#"{"domains": 1, "shares": [1.0]"#);
    let out = bin()
        .args(["analyze", "--scenario"])
        .arg(&bad)
        .arg("--allocation")
        .arg(repo_file("scenarios/allocation_single_domain.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("bad.json"));
}

#[test]
fn invalid_scenario_values_are_diagnosed() {
    let dir = tmp_dir("invalid");
    let mut scenario: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(repo_file("scenarios/nsos_single_domain.json")).unwrap(),
    )
    .unwrap();
    scenario["shares"] = serde_json::json!([0.4, 0.4]);
    let bad = write_json(&dir, "shares.json", &serde_json::to_string(&scenario).unwrap());
    let out = bin()
        .args(["analyze", "--scenario"])
        .arg(&bad)
        .arg("--allocation")
        .arg(repo_file("scenarios/allocation_single_domain.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("shares"));
}

#[test]
fn dimension_sweep_matches_check_count_formula() {
    let dir = tmp_dir("dimension");
    let out = bin()
        .args(["dimension", "--scenario"])
        .arg(repo_file("scenarios/nsos_single_domain.json"))
        .args(["--sweep", "2000,5000", "--brute-force", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let csv = std::fs::read_to_string(dir.join("dimension.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("lambda,feasible,total_cores"));
    assert!(header.ends_with("bf_total_cores,bf_predicted_t,bf_checks,n_checks_formula"));
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        // heuristic total equals the oracle total on these rates
        let total: u32 = cols[2].parse().unwrap();
        let bf_total: u32 = cols[cols.len() - 4].parse().unwrap();
        assert_eq!(total, bf_total, "row: {line}");
        // the oracle's evaluation count equals the closed-form check count
        let checks: u64 = cols[cols.len() - 2].parse().unwrap();
        let formula: u64 = cols[cols.len() - 1].parse().unwrap();
        assert_eq!(checks, formula, "row: {line}");
    }
    assert!(dir.join("manifest.json").exists());
}

#[test]
fn dimension_refuses_oversized_brute_force() {
    // A guard of 2 evaluations cannot even cover the stability minimum.
    let out = bin()
        .args(["dimension", "--scenario"])
        .arg(repo_file("scenarios/nsos_single_domain.json"))
        .args(["--sweep", "5000", "--brute-force", "--guard", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_of(&out).contains("checks"), "stderr: {}", stderr_of(&out));
}

#[test]
fn simulate_writes_summary_per_node_and_trace() {
    let dir = tmp_dir("simulate");
    let out = bin()
        .args(["simulate", "--scenario"])
        .arg(repo_file("scenarios/nsos_single_domain.json"))
        .args([
            "--dimension",
            "--duration",
            "10",
            "--warmup",
            "1",
            "--seed",
            "5",
            "--trace",
            "--out",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let summary = std::fs::read_to_string(dir.join("simulate.csv")).unwrap();
    assert!(summary.starts_with("mean_response,ci95,offered,served,rejected"));
    let per_node = std::fs::read_to_string(dir.join("per_node.csv")).unwrap();
    assert!(per_node.lines().count() > 5);
    let trace = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("arrival,exit,domain"));
    assert!(trace.lines().count() > 1_000);
}

#[test]
fn simulate_reruns_are_bit_identical() {
    let dir_a = tmp_dir("repro-a");
    let dir_b = tmp_dir("repro-b");
    for dir in [&dir_a, &dir_b] {
        let out = bin()
            .args(["simulate", "--scenario"])
            .arg(repo_file("scenarios/nsos_single_domain.json"))
            .args(["--dimension", "--duration", "8", "--warmup", "1", "--seed", "11", "--out"])
            .arg(dir)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    }
    let a = std::fs::read(dir_a.join("simulate.csv")).unwrap();
    let b = std::fs::read(dir_b.join("simulate.csv")).unwrap();
    assert_eq!(a, b, "same seed must reproduce byte-identical output");
}

#[test]
fn drp_produces_timeline_and_scale_events() {
    let dir = tmp_dir("drp");
    let profile = write_json(
        &dir,
        "profile.json",
        r#"{"segments": [{"start": 0.0, "rate": 600.0}, {"start": 600.0, "rate": 1500.0}],
            "family": "poisson"}"#,
    );
    let out = bin()
        .args(["drp", "--scenario"])
        .arg(repo_file("scenarios/nsos_single_domain.json"))
        .arg("--profile")
        .arg(&profile)
        .args([
            "--duration",
            "1200",
            "--dt",
            "600",
            "--monitor-window",
            "60",
            "--boot-delay",
            "30",
            "--seed",
            "3",
            "--out",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let timeline = std::fs::read_to_string(dir.join("timeline.csv")).unwrap();
    assert_eq!(timeline.lines().count(), 3, "two control windows plus header");
    assert!(timeline.starts_with("start,end,actual_rate"));
    assert!(dir.join("scale_events.csv").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "drp");
    assert_eq!(manifest["seed"], 3);
}

#[test]
fn complexity_smoke_produces_fits() {
    let dir = tmp_dir("complexity");
    let out = bin()
        .args(["complexity", "--scenario"])
        .arg(repo_file("scenarios/nsos_single_domain.json"))
        .args(["--lambda-sweep", "20300,40300,60300", "--runs", "3", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let fits: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("fits.json")).unwrap()).unwrap();
    assert!(fits["lambda_quadratic"]["r2"].is_number());
    let csv = std::fs::read_to_string(dir.join("complexity.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn unknown_entity_in_allocation_is_diagnosed() {
    let dir = tmp_dir("unknown-entity");
    let alloc = write_json(
        &dir,
        "alloc.json",
        r#"{"entities": [{"kind": "DSO", "domain": 7, "cores": 2}]}"#,
    );
    let out = bin()
        .args(["analyze", "--scenario"])
        .arg(repo_file("scenarios/nsos_single_domain.json"))
        .arg("--allocation")
        .arg(&alloc)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("DSO.7"));
}
