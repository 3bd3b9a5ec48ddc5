use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aleph-lab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_is_deterministic_per_seed() {
    let args = ["run", "--nodes", "4", "--mode", "aleph", "--scheduler", "fair", "--seed", "7", "--budget", "3000", "--tx-rate", "0.2"];
    let a = cli(&args);
    let b = cli(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(stdout(&a), stdout(&b));
    let other = cli(&["run", "--nodes", "4", "--seed", "8", "--budget", "3000", "--tx-rate", "0.2"]);
    assert_ne!(stdout(&a), stdout(&other));
}

#[test]
fn repeat_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = cli(&["run", "--nodes", "4", "--mode", "quick", "--byzantine", "forker:2", "--seed", "1", "--repeat", "3", "--budget", "2000", "--tx-rate", "0.3", "--out-dir", out]);
    assert!(o.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"], 3);
    assert_eq!(summary["failed"], 0);
    for seed in 1..=3 {
        let metrics = std::fs::read_to_string(dir.path().join(format!("metrics-{seed}.jsonl"))).unwrap();
        let first: serde_json::Value = serde_json::from_str(metrics.lines().next().unwrap()).unwrap();
        assert!(first["kind"].is_string());
        assert!(dir.path().join(format!("trace-{seed}.json")).exists());
    }
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenario.json");
    std::fs::write(&path, r#"{"n": 7, "mode": "quick", "tx_rate": 0.2, "budget": 2000, "seed": 5}"#).unwrap();
    let o = cli(&["run", "--config", path.to_str().unwrap(), "--seed", "11"]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().nth(1).unwrap().trim_start().starts_with("11 "));
}

#[test]
fn beacon_tosses_agree_with_garbage_dealers() {
    let o = cli(&["beacon", "--nodes", "4", "--byzantine", "garbage+withholder", "--tosses", "2", "--seed", "3"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).matches("equal at all honest nodes").count(), 2);
    let setup_only = cli(&["beacon", "--nodes", "4", "--tosses", "0", "--seed", "3"]);
    assert!(setup_only.status.success());
    assert!(!stdout(&setup_only).contains("toss 0"));
}

#[test]
fn usage_and_config_errors() {
    assert_eq!(cli(&["run", "--bogus"]).status.code(), Some(2));
    assert_eq!(cli(&["run", "--nodes", "5"]).status.code(), Some(2));
    assert_eq!(cli(&["verify", "no-such-suite"]).status.code(), Some(2));
    assert_eq!(cli(&["attack", "--attack", "flood"]).status.code(), Some(2));
}

#[test]
fn verify_named_suite() {
    let o = cli(&["verify", "threshold", "6"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert_eq!(s.matches("[PASS]").count(), 1);
    assert!(s.contains("1 of 1 criteria passed"));
}

#[test]
fn small_fork_bomb() {
    let o = cli(&["attack", "--attack", "fork-bomb", "--K", "2", "--mode", "quick", "--seed", "1"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert_eq!(stdout(&o).matches(": PASS").count(), 2);
}
