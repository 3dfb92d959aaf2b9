//! End-to-end tests that drive the compiled binary and check its exit-code
//! contract: 0 success, 1 usage, 2 numerical failure, 3 I/O failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn taskfv() -> Command {
    Command::new(env!("CARGO_BIN_EXE_taskfv"))
}

fn run(args: &[&str]) -> Output {
    taskfv().args(args).output().expect("binary should spawn")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("taskfv-cli-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).expect("temp dir should be creatable");
    dir
}

fn cleanup(dir: &Path) {
    let _ = fs::remove_dir_all(dir);
}

#[test]
fn successful_run_writes_snapshots_and_exits_zero() {
    let dir = temp_dir("run-ok");
    let prefix = dir.join("out/state");
    let out = run(&[
        "run",
        "--nx",
        "16",
        "--ny",
        "16",
        "--npartx",
        "2",
        "--nparty",
        "2",
        "--dt",
        "0.015625",
        "--iters",
        "8",
        "--output-every",
        "4",
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("system=euler-cosine"), "stdout: {text}");
    assert!(text.contains("wall_s="), "stdout: {text}");
    for step in [0, 4, 8] {
        let path = dir.join(format!("out/state-{step:06}.tfv"));
        assert!(path.is_file(), "missing snapshot {}", path.display());
    }
    cleanup(&dir);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = run(&["run", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn mismatched_partition_is_a_usage_error() {
    let out = run(&["run", "--nx", "16", "--npartx", "3", "--dt", "0.01", "--iters", "2"]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("split"), "stderr: {}", stderr(&out));
}

#[test]
fn cfl_violation_is_a_numerical_error() {
    let out = run(&["run", "--nx", "16", "--dt", "1.0", "--iters", "2"]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("CFL"), "stderr: {}", stderr(&out));
}

#[test]
fn unwritable_output_prefix_is_an_io_error() {
    let dir = temp_dir("run-io");
    let blocker = dir.join("blocker");
    fs::write(&blocker, b"plain file").unwrap();
    let prefix = blocker.join("state");
    let out = run(&[
        "run",
        "--nx",
        "16",
        "--dt",
        "0.015625",
        "--iters",
        "2",
        "--output-every",
        "1",
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
    cleanup(&dir);
}

#[test]
fn flags_override_config_file_values() {
    let dir = temp_dir("run-config");
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, "nx = 8\nny = 8\ndt = 0.015625\niters = 4\n").unwrap();
    let out = run(&["run", "--config", cfg.to_str().unwrap(), "--nx", "16"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("nx=16"), "flag should win: {text}");
    assert!(text.contains("ny=8"), "file value should survive: {text}");
    cleanup(&dir);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = temp_dir("run-badkey");
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, "frobnicate = 1\n").unwrap();
    let out = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("frobnicate"), "stderr: {}", stderr(&out));
}
