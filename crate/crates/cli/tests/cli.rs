use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nbldpc"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn construct_then_load() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        &[
            "construct",
            "--out",
            "c.txt",
            "--set",
            "n=60",
            "--set",
            "p=4",
            "--set",
            "stages=5",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let code = nbldpc::RepCode::load(&tmp.path().join("c.txt")).unwrap();
    assert_eq!(code.stages(), 5);
    assert_eq!(code.mother().n_symbols(), 60);
    assert!(tmp.path().join("c.txt.manifest").exists());
}

#[test]
fn unknown_key_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["bound", "--set", "bogus=1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn manifest_for_other_command_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(
        tmp.path(),
        &["bound", "--out", "b.csv", "--set", "snr_db=-15", "--set", "n_bits=1e4"]
    )
    .status
    .success());
    let out = run(tmp.path(), &["skr", "--config", "b.csv.manifest"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bound_at_half_is_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        &[
            "bound",
            "--set",
            "epsilon=0.5",
            "--set",
            "snr_db=-15",
            "--set",
            "n_bits=1e5",
        ],
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text
        .lines()
        .find(|l| !l.starts_with('#') && !l.starts_with("n_bits"))
        .unwrap();
    let bound: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    assert_eq!(bound, 1.0);
    assert!(text.ends_with("# complete\n"));
}

#[test]
fn failed_run_leaves_no_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        &[
            "simulate",
            "--out",
            "s.csv",
            "--set",
            "code=missing.txt",
            "--set",
            "snr_db=0",
        ],
    );
    assert!(!out.status.success());
    assert!(!tmp.path().join("s.csv").exists());
}

#[test]
fn csv_header_records_config_hash() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(tmp.path(), &["skr", "--out", "k.csv", "--set", "l_step=50"])
        .status
        .success());
    let text = std::fs::read_to_string(tmp.path().join("k.csv")).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("# nbldpc ") && first.contains("command=skr"));
    let manifest = std::fs::read_to_string(tmp.path().join("k.csv.manifest")).unwrap();
    let hash = first.rsplit("config=").next().unwrap();
    assert!(manifest.contains(hash));
    assert!(!tmp.path().join("k.csv.partial").exists());
}
