//! Exit codes and artifacts of the command-line driver.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CONFIG: &str = r#"
t = 2
eta = 0.5
seeds = [0, 1]

[ensemble]
n = 30
family = "gaussian"

[problem]
kind = "nnpca"

[denoiser]
kind = "polynomial"
coeffs = [0.0, 1.0]

[corruption]
epsilon = 0.1
adversary = { kind = "rank_one_spike" }

[calibration]
mc_samples = 100
"#;

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("config.toml");
    let text = format!("output_dir = {:?}\n{CONFIG}{extra}", dir.join("out"));
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robust-amp")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn stages_succeed_and_write_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let cfg = cfg.to_str().unwrap();
    for cmd in ["sample", "corrupt", "amp", "se", "calibrate"] {
        let out = run(&[cmd, "--config", cfg, "--seed", "3"]);
        assert_eq!(code(&out), 0, "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["X.symmat", "Y.symmat", "support.json", "trace.json", "se.json", "stats.json"] {
        assert!(dir.path().join("out").join(file).exists(), "{file}");
    }
}

#[test]
fn experiment_then_audit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let cfg = cfg.to_str().unwrap();
    let out = run(&["experiment", "--config", cfg, "--workers", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/results.csv").exists());
    let out = run(&["audit", "--config", cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&["no-such-command"])), 1);
    assert_eq!(code(&run(&["sample"])), 1);
    assert_eq!(code(&run(&["sample", "--config", "/nonexistent/config.toml"])), 1);
    assert_eq!(code(&run(&["sample", "--seed", "not-a-number"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "unknown_key = 3\n");
    assert_eq!(code(&run(&["sample", "--config", cfg.to_str().unwrap()])), 1);
}

#[test]
fn resource_cap_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "\n[lsh]\nrobust = true\nrobust_n_cap = 10\n");
    let out = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unsolved_system_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--max-iters", "1", "--tolerance", "1e-12"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/solve.json").exists());
}
