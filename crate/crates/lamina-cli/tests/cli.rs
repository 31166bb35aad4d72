//! Binary-level checks of the command-line contract: exit codes, error
//! formats, determinism of seeded runs, and the shipped config template.

use std::path::PathBuf;
use std::process::{Command, Output};

fn lamina() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lamina"))
}

fn run(args: &[&str]) -> Output {
    lamina().args(args).output().expect("binary should run")
}

fn stdout_of(out: &Output) -> &str {
    std::str::from_utf8(&out.stdout).expect("stdout should be UTF-8")
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = std::str::from_utf8(&out.stderr).expect("stderr should be UTF-8");
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr not JSON ({e}): {text}"))
}

/// A deliberately small grid so geometry commands finish in well under a
/// second; numerical quality does not matter for contract checks.
fn tiny_config(dir: &tempfile::TempDir) -> PathBuf {
    let path = dir.path().join("tiny.toml");
    std::fs::write(
        &path,
        "[grid]\ndomain-nodes = 5\nfiber-nodes = 16\ncentral-nodes = 32\ncs-depth = 12\n",
    )
    .expect("write config");
    path
}

#[test]
fn atypical_counts_match_the_hand_enumerated_oracle() {
    // Length-4 words, single-letter pattern, window 0.5 +- 0.1: the classes
    // with 0, 1, 3, or 4 ones deviate, so 1 + 4 + 4 + 1 = 10 words.
    let out = run(&["atypical", "--w", "1", "--kappa", "0.1", "--N", "4"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout_of(&out);
    assert!(text.contains("deviating-total,,10,,"), "missing oracle row in:\n{text}");
    assert!(text.contains("class,occurrences,count,frequency,deviating"));
}

#[test]
fn seeded_runs_are_byte_identical_and_thread_count_independent() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = tiny_config(&dir);
    let args = [
        "contraction",
        "--config",
        config.to_str().expect("utf-8 path"),
        "--pairs",
        "4",
        "--points",
        "2",
    ];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success(), "stderr: {}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(first.stdout, second.stdout, "rerun changed the output bytes");
    let threaded = lamina()
        .args(args)
        .env("LAMINA_THREADS", "2")
        .output()
        .expect("binary should run");
    assert!(threaded.status.success());
    assert_eq!(first.stdout, threaded.stdout, "thread count changed the output bytes");
}

#[test]
fn seed_override_changes_the_sample() {
    let base = ["weak-ergodic", "--orbits", "10", "--n", "50"];
    let one = run(&[&base[..], &["--seed", "1"][..]].concat());
    let two = run(&[&base[..], &["--seed", "2"][..]].concat());
    assert!(one.status.success() && two.status.success());
    assert_ne!(one.stdout, two.stdout, "different seeds should draw different orbits");
}

#[test]
fn invalid_input_exits_two_with_a_json_error() {
    let out = run(&["atypical", "--w", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["kind"], "error");
    assert!(err["error"]["message"].as_str().expect("message").contains('2'));
}

#[test]
fn failed_assertion_exits_one_with_a_json_error() {
    let out = run(&["nu-curve", "--from", "16", "--to", "18", "--min-nu", "0.9"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["kind"], "assertion");
}

#[test]
fn unparsable_thread_env_exits_two() {
    let out = lamina()
        .args(["atypical", "--N", "4"])
        .env("LAMINA_THREADS", "plenty")
        .output()
        .expect("binary should run");
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "error");
}

#[test]
fn zero_perturbation_contraction_stays_under_the_rate_oracle() {
    // With rho = 0 the measured pair ratios are bounded by the base rate
    // 0.5 plus a small grid term, independently of the solver details.
    let dir = tempfile::tempdir().expect("tempdir");
    let config = tiny_config(&dir);
    let out = run(&[
        "contraction",
        "--config",
        config.to_str().expect("utf-8 path"),
        "--rho",
        "0",
        "--pairs",
        "6",
        "--points",
        "3",
        "--bound",
        "0.55",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let mut rows = 0;
    for line in stdout_of(&out).lines() {
        if line.starts_with('#') || line.starts_with("pair,") {
            continue;
        }
        let ratio: f64 = line.split(',').nth(4).expect("ratio column").parse().expect("ratio");
        assert!(ratio <= 0.55, "ratio {ratio} above the zero-perturbation oracle");
        rows += 1;
    }
    assert_eq!(rows, 6);
}

#[test]
fn file_output_matches_stdout() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("table.csv");
    let piped = run(&["atypical", "--N", "8"]);
    let filed = run(&["atypical", "--N", "8", "--out", path.to_str().expect("utf-8 path")]);
    assert!(piped.status.success() && filed.status.success());
    assert!(filed.stdout.is_empty(), "file mode should not write to stdout");
    let written = std::fs::read(&path).expect("output file");
    assert_eq!(written, piped.stdout);
}

#[test]
fn config_template_round_trips_and_drives_runs() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("template.toml");
    let emit = run(&["config-template", "--out", path.to_str().expect("utf-8 path")]);
    assert!(emit.status.success());
    let text = std::fs::read_to_string(&path).expect("template file");
    let parsed: toml::Value = toml::from_str(&text).expect("template should be valid TOML");
    assert!(parsed.get("map").is_some() && parsed.get("grid").is_some());
    // The template spells out the defaults, so a run configured by it is
    // byte-identical to an unconfigured run, including the config hash.
    let bare = run(&["atypical", "--N", "6"]);
    let templated = run(&["atypical", "--N", "6", "--config", path.to_str().expect("utf-8 path")]);
    assert!(bare.status.success() && templated.status.success());
    assert_eq!(bare.stdout, templated.stdout);
}

#[test]
fn box_dim_report_is_valid_json() {
    let out = run(&["box-dim", "--depth", "16", "--coarse", "8", "--fine", "16"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(stdout_of(&out)).expect("stdout should be JSON");
    assert!(report["meta"]["config-sha256"].is_string());
    let dim = report["dimension"].as_f64().expect("dimension");
    assert!(dim > 0.0 && dim < 1.0, "dimension {dim} outside (0, 1)");
    assert_eq!(report["counts"].as_array().expect("counts").len(), 9);
}

#[test]
fn falconer_report_is_valid_json_and_passes() {
    let out = run(&["falconer"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(stdout_of(&out)).expect("stdout should be JSON");
    assert_eq!(report["pass"], true);
    let set = report["set"]["dimension"].as_f64().expect("set dimension");
    let image = report["image"]["dimension"].as_f64().expect("image dimension");
    assert!(set > 0.0 && set < 1.0, "set dimension {set} outside (0, 1)");
    assert!(image > 0.0 && image < 1.0, "image dimension {image} outside (0, 1)");
}

#[test]
fn solve_leaf_emits_metadata_then_a_csv_header() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = tiny_config(&dir);
    let out = run(&[
        "solve-leaf",
        "--config",
        config.to_str().expect("utf-8 path"),
        "--depth",
        "8",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout_of(&out);
    assert!(text.starts_with("# lamina-cli:"), "missing version header:\n{text}");
    assert!(text.contains("# sup-norm:"));
    assert!(text.contains("\nnode,axis0,axis1,m,value0\n"));
}
