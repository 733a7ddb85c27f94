//! The `simnet` executable on the shipped example script and a short sweep.

use std::process::Command;

fn simnet(args: &[&str]) -> (bool, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_simnet")).args(args).output().unwrap();
    (out.status.success(), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn example_script_passes_and_exports_a_trace() {
    let script = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/four_flows.txt");
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.txt");
    let (ok, out) = simnet(&["run", "--seed", "7", "--scenario", script, "--trace", trace.to_str().unwrap()]);
    assert!(ok, "{out}");
    assert!(out.contains("delivered=4 audit[A=3,B=3] PASS"), "{out}");

    let first = std::fs::read_to_string(&trace).unwrap();
    assert!(first.lines().all(|l| l.split(' ').count() == 5), "step from -> to hex");
    let (_, _) = simnet(&["run", "--seed", "7", "--scenario", script, "--trace", trace.to_str().unwrap()]);
    assert_eq!(std::fs::read_to_string(&trace).unwrap(), first, "same seed, same trace");
}

#[test]
fn fuzz_sweep() {
    let (ok, out) = simnet(&["fuzz", "--seeds", "100..103"]);
    assert!(ok, "{out}");
    assert!(out.ends_with("fuzz: 3/3 passed\n"), "{out}");
}

#[test]
fn bad_arguments_fail() {
    assert!(!simnet(&["fuzz", "--seeds", "5..5"]).0);
    assert!(!simnet(&["run", "--seed", "1", "--scenario", "/nonexistent"]).0);
}
