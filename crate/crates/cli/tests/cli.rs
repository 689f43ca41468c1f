//! End-to-end checks of the `cellfree` binary: exit codes, report files,
//! and the config-file/--set override path.

use std::fs;
use std::process::Command;

use tempfile::tempdir;

fn cellfree() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cellfree"))
}

// Keep the Monte Carlo small: these tests exercise plumbing, not physics.
const TINY: &[&str] = &[
    "--set",
    "num_rus=2",
    "--set",
    "antennas_per_ru=4",
    "--set",
    "num_ues=6",
    "--set",
    "pilot_dim=6",
    "--set",
    "num_layouts=1",
    "--set",
    "fading_draws=2",
];

#[test]
fn validate_accepts_a_good_plan() {
    let out = cellfree().arg("validate").args(TINY).output().unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("plan ok"));
}

#[test]
fn validate_rejects_a_bad_plan_with_exit_code_2() {
    let out = cellfree()
        .args(["validate", "--set", "pilot_dim=500"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("pilot_dim"));
}

#[test]
fn unknown_config_key_is_a_configuration_error() {
    let out = cellfree()
        .args(["validate", "--set", "num_cells=7"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_reports_and_honors_the_config_file() {
    let dir = tempdir().unwrap();
    let config_path = dir.path().join("tiny.conf");
    fs::write(
        &config_path,
        "num_rus = 2\nantennas_per_ru = 4\nnum_ues = 6\npilot_dim = 6\n\
         num_layouts = 1\nfading_draws = 2\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = cellfree()
        .arg("run")
        .args(["--config", config_path.to_str().unwrap()])
        // --set overrides the file: drop to a single fading draw.
        .args(["--set", "fading_draws=1"])
        .args(["--schemes", "lmmse_cluster,lpzf_ppa", "--estimators", "ideal"])
        .args(["--out", out_dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let csv_path = out_dir.join("point_L2_M4_K6_T6.csv");
    let body = fs::read_to_string(&csv_path).unwrap();
    assert!(body.contains("fading_draws = 1"), "override lost:\n{body}");
    assert!(body.lines().any(|l| l.starts_with("0,0,")));
    assert!(out_dir.join("summary.json").exists());
}

#[test]
fn sweep_axes_produce_one_csv_per_point() {
    let dir = tempdir().unwrap();
    let out = cellfree()
        .arg("run")
        .args(TINY)
        .args(["--pilots", "4,6", "--estimators", "ideal"])
        .args(["--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("point_L2_M4_K6_T4.csv").exists());
    assert!(dir.path().join("point_L2_M4_K6_T6.csv").exists());
}

#[test]
fn antenna_budget_mismatch_is_rejected() {
    let out = cellfree()
        .args(["validate", "--lm", "2x4,2x8", "--antenna-budget", "8"])
        .args(TINY)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("antenna budget"));
}

#[test]
fn dump_layout_emits_all_nodes() {
    let out = cellfree().arg("dump-layout").args(TINY).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("node_class,index,x,y"));
    assert_eq!(stdout.lines().filter(|l| l.starts_with("ru,")).count(), 2);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("ue,")).count(), 6);
}

#[test]
fn dump_layout_is_deterministic_per_layout_index() {
    let a = cellfree().arg("dump-layout").args(TINY).output().unwrap();
    let b = cellfree().arg("dump-layout").args(TINY).output().unwrap();
    assert_eq!(a.stdout, b.stdout);
    let c = cellfree()
        .args(["dump-layout", "--layout", "1"])
        .args(TINY)
        .output()
        .unwrap();
    assert_ne!(a.stdout, c.stdout);
}
