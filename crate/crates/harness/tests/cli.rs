//! The binary's exit codes and file outputs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_loopsmith"));
    c.env("RUST_LOG", "error");
    c
}

fn fixture(p: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(p)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn only_subdir(root: &Path) -> PathBuf {
    let dirs: Vec<PathBuf> =
        std::fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).filter(|p| p.is_dir()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.into_iter().next().unwrap()
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&bin().output().unwrap()), 2);
    assert_eq!(code(&bin().args(["lqr", "--q", "1,1", "--r", "1"]).output().unwrap()), 2);
}

#[test]
fn config_without_plant_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"targets": {"mse": 1.0, "settling_time": 1.0, "overshoot": 1.0}}"#).unwrap();
    let o = bin().args(["optimize", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("plant"));
}

#[test]
fn lqr_for_the_pendulum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lqr.json");
    let o =
        bin().args(["lqr", "--plant", "pendulum", "--q", "10,0", "--r", "0.1", "--out"]).arg(&out).output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    let k: Vec<f64> = v["k"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((k[0] - 10.50).abs() < 0.05 * 10.50 && (k[1] - 0.63).abs() < 0.05 * 0.63, "{k:?}");
}

#[test]
fn lqr_for_an_explicit_system() {
    let o = bin().args(["lqr", "--a", "0", "--b", "1", "--q", "1", "--r", "1"]).output().unwrap();
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["k"][0].as_f64().unwrap() - 1.0).abs() < 1e-9);

    // B = 0 leaves the unstable mode uncontrollable.
    let o = bin().args(["lqr", "--a", "1", "--b", "0", "--q", "1", "--r", "1"]).output().unwrap();
    assert_ne!(code(&o), 0);
}

#[test]
fn plotdata_on_an_empty_directory_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&bin().arg("plotdata").arg(dir.path()).output().unwrap()), 2);
}

#[test]
fn unreachable_endpoint_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("live.json");
    std::fs::write(
        &cfg,
        r#"{
  "plant": "dc_motor",
  "controllers": ["P"],
  "targets": {"mse": 0.9, "settling_time": 3.0, "overshoot": 10.0},
  "agents": {"default": {"kind": "live", "endpoint": {
    "base_url": "http://127.0.0.1:9/v1", "model": "none", "api_key_env": "LOOPSMITH_CLI_KEY",
    "timeout_s": 2, "max_retries": 0, "backoff_base_s": 0}}}
}"#,
    )
    .unwrap();
    let o = bin()
        .env("LOOPSMITH_CLI_KEY", "k")
        .args(["optimize", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    // The transcript is still written for the failed run.
    assert!(only_subdir(dir.path()).join("transcript.jsonl").exists());

    let o = bin()
        .env_remove("LOOPSMITH_CLI_KEY")
        .args(["optimize", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn heuristic_runs_are_deterministic() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let o = bin()
            .args(["optimize", "--config"])
            .arg(fixture("heuristic_dc.json"))
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let run_dir = only_subdir(dir.path());
        for f in ["config.json", "iterations.jsonl", "log.txt", "events.log", "report.json", "transcript.jsonl"] {
            assert!(run_dir.join(f).exists(), "{f} missing");
        }
        let read = |f: &str| std::fs::read_to_string(run_dir.join(f)).unwrap();
        (read("report.json"), read("log.txt"), read("transcript.jsonl"), dir)
    };
    let (ra, la, ta, _a) = run();
    let (rb, lb, tb, _b) = run();
    assert_eq!(ra, rb);
    assert_eq!(la, lb);
    assert_eq!(ta, tb);
    assert!(la.lines().next().unwrap().starts_with("#1/30 | Type:P | Kp:"));
}

#[test]
fn replay_then_plotdata() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["replay", "--config"])
        .arg(fixture("case1/config.json"))
        .arg("--transcript")
        .arg(fixture("case1/transcript.jsonl"))
        .arg("--expected")
        .arg(fixture("case1/log.txt"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run_dir = only_subdir(dir.path());
    assert!(run_dir.join("comparison.json").exists());

    let plots = dir.path().join("plots");
    let o = bin().arg("plotdata").arg(&run_dir).arg("--out").arg(&plots).output().unwrap();
    assert_eq!(code(&o), 0);
    let evo = std::fs::read_to_string(plots.join("evolution_P.csv")).unwrap();
    assert_eq!(evo.lines().count(), 28);
}

#[test]
fn replay_past_the_end_of_a_transcript_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let short = dir.path().join("short.jsonl");
    let full = std::fs::read_to_string(fixture("case1/transcript.jsonl")).unwrap();
    std::fs::write(&short, full.lines().take(8).collect::<Vec<_>>().join("\n")).unwrap();
    let o = bin()
        .args(["replay", "--config"])
        .arg(fixture("case1/config.json"))
        .arg("--transcript")
        .arg(&short)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn montecarlo_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["montecarlo", "--config"])
        .arg(fixture("pendulum_mc.json"))
        .args(["--runs", "4", "--jobs", "2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    assert!(csv.lines().next().unwrap().starts_with("scenario,method"));
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
    assert!(dir.path().join("comparison.json").exists());
}
