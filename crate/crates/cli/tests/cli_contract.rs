//! Exit-code and artifact contract for the `scorelab` binary.
//!
//! Codes: 0 pass, 1 a completed check failed its tolerance, 2 config or
//! usage error, 3 runtime failure.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scorelab"))
        .args(args)
        .output()
        .expect("binary should execute")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code (signal?)")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).expect("write config");
    path.to_string_lossy().into_owned()
}

const BIMODAL_BODY: &str = r#"{
  "mixture": {
    "dim": 1,
    "components": [
      { "weight": 0.5, "mean": [-1.0], "cov": 0.3 },
      { "weight": 0.5, "mean": [1.5], "cov": 0.5 }
    ]
  },
  "sigma": 0.5,
  "seed": 7,
  "knobs": { "eval_points": 5 }
}"#;

const SMOOTH_2D_BODY: &str = r#"{
  "mixture": {
    "dim": 2,
    "components": [
      { "weight": 0.5, "mean": [-1.0, 0.0], "cov": [[0.8, 0.3], [0.3, 0.6]] },
      { "weight": 0.5, "mean": [1.0, 1.0], "cov": [[0.5, -0.2], [-0.2, 0.9]] }
    ]
  },
  "sigma": 0.5,
  "seed": 7
}"#;

#[test]
fn missing_subcommand_is_a_usage_error() {
    assert_eq!(code(&run(&[])), 2);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = run(&["theorem-check", "--frobnicate"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn malformed_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "broken.json", "{ not json");
    let out = run(&["theorem-check", "--config", &cfg]);
    assert_eq!(code(&out), 2);
    assert!(
        stderr(&out).contains("configuration error"),
        "stderr should name the problem: {}",
        stderr(&out)
    );
}

#[test]
fn unknown_config_field_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "extra.json",
        r#"{ "mixture": { "dim": 1, "components": [ { "weight": 1.0, "mean": [0.0], "cov": 1.0 } ] }, "sigma": 0.5, "bogus": 1 }"#,
    );
    let out = run(&["theorem-check", "--config", &cfg]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bogus"), "stderr: {}", stderr(&out));
}

#[test]
fn missing_mixture_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "orphan.json",
        r#"{ "mixture": "does_not_exist.json", "sigma": 0.5 }"#,
    );
    let out = run(&["theorem-check", "--config", &cfg]);
    assert_eq!(code(&out), 2);
}

#[test]
fn mixture_path_resolves_relative_to_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("mix.json"),
        r#"{ "dim": 1, "components": [ { "weight": 1.0, "mean": [0.0], "cov": 1.0 } ] }"#,
    )
    .unwrap();
    let cfg = write_config(
        dir.path(),
        "uses_path.json",
        r#"{ "mixture": "mix.json", "sigma": 0.5, "knobs": { "eval_points": 3 } }"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "theorem-check",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
}

#[test]
fn descending_sigma_list_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", BIMODAL_BODY);
    let out = run(&["theorem-check", "--config", &cfg, "--sigma", "0.5,0.25"]);
    assert_eq!(code(&out), 2);
    assert!(
        stderr(&out).contains("ascending"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn nonpositive_sigma_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", BIMODAL_BODY);
    assert_eq!(code(&run(&["reconstruct", "--config", &cfg, "--sigma", "0"])), 2);
    assert_eq!(
        code(&run(&["reconstruct", "--config", &cfg, "--sigma", "-1.0"])),
        2
    );
    assert_eq!(
        code(&run(&["reconstruct", "--config", &cfg, "--sigma", "abc"])),
        2
    );
}

#[test]
fn limit_sweep_requires_at_least_three_levels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", BIMODAL_BODY);
    let out = run(&["limit-sweep", "--config", &cfg, "--sigma", "0.1,0.2"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn single_level_commands_reject_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", BIMODAL_BODY);
    for cmd in ["reconstruct", "deconvolve", "mse-probe"] {
        let out = run(&[cmd, "--config", &cfg, "--sigma", "0.25,0.5"]);
        assert_eq!(code(&out), 2, "{cmd} should reject a sweep");
    }
}

#[test]
fn deconvolve_requires_power_of_two_grid() {
    let dir = tempfile::tempdir().unwrap();
    let body = BIMODAL_BODY.replace(
        "\"seed\": 7,",
        "\"seed\": 7, \"grid\": { \"box_lo\": [-12.0], \"box_hi\": [12.0], \"shape\": [1000] },",
    );
    let cfg = write_config(dir.path(), "cfg.json", &body);
    let out = run(&["deconvolve", "--config", &cfg]);
    assert_eq!(code(&out), 2);
    assert!(
        stderr(&out).contains("power-of-two"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn path_check_rejects_one_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", BIMODAL_BODY);
    let out = run(&["path-check", "--config", &cfg]);
    assert_eq!(code(&out), 2);
}

#[test]
fn quadrature_commands_reject_three_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cfg3d.json",
        r#"{
          "mixture": { "dim": 3, "components": [ { "weight": 1.0, "mean": [0.0, 0.0, 0.0], "cov": 1.0 } ] },
          "sigma": 0.5
        }"#,
    );
    for cmd in ["theorem-check", "mse-probe", "reconstruct", "deconvolve"] {
        let out = run(&[cmd, "--config", &cfg]);
        assert_eq!(code(&out), 2, "{cmd} should reject d = 3");
    }
}

#[test]
fn planted_sigma_mismatch_fails_the_check_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "mismatch.json",
        r#"{
          "mixture": { "dim": 1, "components": [ { "weight": 1.0, "mean": [0.0], "cov": 1.0 } ] },
          "sigma": 0.5,
          "debug_sigma_mismatch": 0.7,
          "knobs": { "eval_points": 5 }
        }"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "theorem-check",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("FAIL"), "stdout: {}", stdout(&out));
    // The report must record the failure honestly.
    let report = fs::read_to_string(out_dir.join("theorem_report.json")).unwrap();
    assert!(report.contains("\"pass\": false"), "report: {report}");
}

#[test]
fn happy_theorem_check_exits_0_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", BIMODAL_BODY);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "theorem-check",
        "--config",
        &cfg,
        "--sigma",
        "0.3,0.8",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("PASS"), "stdout: {}", stdout(&out));
    for name in [
        "resolved_config.json",
        "theorem_check.csv",
        "theorem_report.json",
        "run.log",
    ] {
        assert!(out_dir.join(name).is_file(), "missing artifact {name}");
    }
    let csv = fs::read_to_string(out_dir.join("theorem_check.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("sigma,x0,denoised0,oracle0,max_abs_diff"),
        "header row"
    );
    // 2 noise levels x 5 points.
    assert_eq!(lines.count(), 10, "one row per evaluation");
    let resolved = fs::read_to_string(out_dir.join("resolved_config.json")).unwrap();
    assert!(
        resolved.contains("0.3") && resolved.contains("0.8"),
        "sigma override should be echoed: {resolved}"
    );
}

#[test]
fn happy_path_check_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg2d.json", SMOOTH_2D_BODY);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "path-check",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(out_dir.join("path_report.json").is_file());
    assert!(out_dir.join("contour_integrals.csv").is_file());
}

#[test]
fn unwritable_output_directory_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", BIMODAL_BODY);
    // Make the parent of the requested output dir a regular file.
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "not a directory").unwrap();
    let out_dir = blocker.join("out");
    let out = run(&[
        "theorem-check",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3, "stderr: {}", stderr(&out));
    assert!(
        stderr(&out).contains("runtime error"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn seed_override_changes_sampled_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", BIMODAL_BODY);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (out_dir, seed) in [(&out_a, "1"), (&out_b, "2")] {
        let out = run(&[
            "theorem-check",
            "--config",
            &cfg,
            "--seed",
            seed,
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    }
    let a = fs::read_to_string(out_a.join("theorem_check.csv")).unwrap();
    let b = fs::read_to_string(out_b.join("theorem_check.csv")).unwrap();
    assert_ne!(a, b, "different seeds should sample different points");
}
