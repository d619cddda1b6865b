//! The `nnha` binary: outputs, reruns and exit codes.

use std::fs;
use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"
experiment = "maxcut-ensemble"
shots = 20

[seeds]
master = 3

[graphs]
kind = "random-regular"
n = 8
degree = 3
count = 3

[maxcut]
p_max = 1
train_graphs = 2
angle_starts = 1
angle_evals = 40
"#;

fn nnha(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_nnha"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b, &a] {
        let out = nnha(&[
            "maxcut-ensemble",
            "--config",
            &cfg,
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let (fa, fb) = (files(&a), files(&b));
    assert!(fa.iter().any(|(n, _)| n == "results.csv"));
    assert!(fa.iter().any(|(n, _)| n == "metadata.json"));
    assert_eq!(fa, fb);
}

#[test]
fn threads_do_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let run = |dir: &Path, threads: &str| {
        let out = nnha(&[
            "maxcut-ensemble",
            "--config",
            &cfg,
            "--out",
            dir.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(out.status.success());
    };
    run(&a, "1");
    run(&b, "3");
    assert_eq!(files(&a), files(&b));
}

#[test]
fn foreign_results_directory_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let dir = tmp.path().join("out");
    let d = dir.to_str().unwrap();
    assert!(nnha(&["maxcut-ensemble", "--config", &cfg, "--out", d])
        .status
        .success());
    let out = nnha(&[
        "maxcut-ensemble",
        "--config",
        &cfg,
        "--out",
        d,
        "--seed",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn experiment_mismatch_and_bad_keys_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    assert_eq!(nnha(&["kcut", "--config", &cfg]).status.code(), Some(2));

    let bad = write_config(
        tmp.path(),
        &CONFIG.replace("shots = 20", "shots = 20\nshot = 1"),
    );
    let out = nnha(&["maxcut-ensemble", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("shot"));
}

#[test]
fn unreadable_config_fails() {
    let out = nnha(&["maxcut-ensemble", "--config", "/nonexistent/config.toml"]);
    assert!(!out.status.success());
}
