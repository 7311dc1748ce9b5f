use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sim")).args(args).output().expect("sim runs")
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name).display().to_string()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn check<'a>(r: &'a Value, name: &str) -> &'a Value {
    r["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap_or_else(|| panic!("no check {name}"))
}

fn untimed(out: &Output) -> Value {
    let mut r = report(out);
    r["wall_time_ms"] = Value::from(0.0);
    r
}

#[test]
fn bsg_json_reports_herald_probability() {
    let out = sim(&["run", "bsg", "--out", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["schema"], 1);
    let c = check(&r, "herald=6/32");
    assert_eq!(c["pass"], true);
    assert_eq!(c["measured"], "0.187500000000 (6/32)");
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["anchor"].as_str().is_some_and(|a| !a.is_empty())));
}

#[test]
fn unknown_scenario_exits_with_usage() {
    let out = sim(&["run", "no-such-scenario"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"), "{err}");
    assert!(err.contains("multirail-bsg"), "{err}");
}

#[test]
fn hadamard_k3_depth_and_couplers() {
    let out = sim(&["run", "compile-hadamard", "--k", "3", "--out", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(check(&r, "k=3 depth")["measured"], "3");
    assert_eq!(check(&r, "k=3 couplers")["measured"], "12");
    assert_eq!(check(&r, "k=3 matrix")["pass"], true);
}

#[test]
fn multirail_sweep_two_copies() {
    let out = sim(&["run", "multirail-bsg", "--sweep", "--copies", "2", "--out", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["parameters"]["placements"], 16);
    assert_eq!(check(&r, "min>=2/32")["pass"], true);
}

#[test]
fn corrupted_cluster_matrix_fails_unitarity() {
    let out = sim(&["run", "cluster-bsg", "--config", &fixture("corrupted_cluster.toml"), "--out", "json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(check(&report(&out), "V-unitary")["pass"], false);
}

#[test]
fn flags_override_config_values() {
    let path = fixture("seeded.toml");
    let from_file = report(&sim(&["run", "multirail-bsg", "--config", &path, "--out", "json"]));
    assert_eq!(from_file["seed"], 5);
    assert_eq!(from_file["parameters"]["copies"], 1);
    let overridden = report(&sim(&["run", "multirail-bsg", "--config", &path, "--seed", "9", "--copies", "2", "--out", "json"]));
    assert_eq!(overridden["seed"], 9);
    assert_eq!(overridden["parameters"]["copies"], 2);
}

#[test]
fn identical_runs_give_identical_reports() {
    for args in [
        &["run", "dna-run", "--protocol", "fused-pairs", "--seed", "3", "--out", "json"][..],
        &["run", "multirail-bsg", "--sweep", "--sample", "5", "--seed", "4", "--out", "json"][..],
        &["run", "temporal-eraser", "--out", "json"][..],
    ] {
        let (a, b) = (sim(args), sim(args));
        assert_eq!(untimed(&a), untimed(&b), "{args:?}");
        let text = |o: &Output| String::from_utf8(o.stdout.clone()).unwrap();
        let strip = |s: String| s.lines().filter(|l| !l.contains("wall_time_ms")).collect::<Vec<_>>().join("\n");
        assert_eq!(strip(text(&a)), strip(text(&b)));
    }
}

#[test]
fn dna_run_writes_transcript() {
    let dir = std::env::temp_dir().join(format!("sim-transcript-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("t.jsonl");
    let out = sim(&["run", "dna-run", "--seed", "1", "--transcript", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(!text.is_empty());
    for line in text.lines() {
        let m: Value = serde_json::from_str(line).unwrap();
        assert!(m["round"].is_u64());
        assert!(m["type"].is_string());
    }
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn oversized_protocol_warns_and_fails() {
    let out = sim(&["run", "dna-run", "--protocol", "seven-node-full"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("warning") && err.contains("photon"), "{err}");
}
