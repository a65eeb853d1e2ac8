//! End-to-end checks of the experiment binary: flags, config files, exit
//! codes and output artifacts.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dualmg"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dualmg_cli_{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn dual_poisson_direct_run_produces_artifacts() {
    let out = temp_dir("dp");
    let status = bin()
        .args([
            "--problem",
            "dual_poisson",
            "--mode",
            "direct",
            "--alpha",
            "0,1",
            "--refine",
            "0",
            "--out",
        ])
        .arg(&out)
        .status()
        .expect("binary runs");
    assert!(status.success());
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"robin_equals_dirichlet\": true"));
    assert!(summary.contains("\"robin_equals_dirichlet\": false"));
    assert!(out.join("summary.csv").exists());

    // The comparison table over the written summary.
    let table = bin()
        .arg("--summarize")
        .arg(out.join("summary.json"))
        .output()
        .unwrap();
    assert!(table.status.success());
    let text = String::from_utf8(table.stdout).unwrap();
    assert_eq!(text.lines().count(), 3, "header plus two rows:\n{text}");
    assert!(text.contains("dual_poisson"));
    let _ = std::fs::remove_dir_all(out);
}

#[test]
fn config_file_with_flag_override() {
    let out = temp_dir("cfg");
    let cfg_path = std::env::temp_dir().join("dualmg_cli_cfg.conf");
    std::fs::write(
        &cfg_path,
        "problem = cook\nmode = smooth_only\nrefine = 0\nalpha = 1\nsweeps = 60\n",
    )
    .unwrap();
    let status = bin()
        .arg("--config")
        .arg(&cfg_path)
        .args(["--sweeps", "3", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("cook_smooth_only_robin_alpha1.csv")).unwrap();
    // Flag overrides the config's sweep count: header plus three rows.
    assert_eq!(csv.lines().count(), 4, "csv:\n{csv}");
    assert!(csv.starts_with("cycle,event,res,res_a,res_b"));
    let _ = std::fs::remove_dir_all(out);
    let _ = std::fs::remove_file(cfg_path);
}

#[test]
fn invalid_configuration_exits_nonzero() {
    let out = bin()
        .args(["--problem", "nonsense", "--out", "/tmp/unused"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("unknown problem"), "stderr: {err}");

    // vcycle needs at least one refinement.
    let out = bin()
        .args(["--problem", "cook", "--mode", "vcycle", "--refine", "0"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
