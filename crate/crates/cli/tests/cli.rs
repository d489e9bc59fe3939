//! Black-box tests of the command-line binary: exit codes, artifact
//! layout, seed override, and byte-level reproducibility across
//! parallelism settings.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cellfree"))
}

/// Scratch directory unique to this process and tag.
fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cellfree-cli-{tag}-{}", std::process::id()));
    if dir.exists() {
        fs::remove_dir_all(&dir).unwrap();
    }
    fs::create_dir_all(&dir).unwrap();
    dir
}

/// A configuration small enough for tests to run in well under a second.
const TINY: &str = r#"
estimator = "sp-true"
receiver = "local-lmmse"

[geometry]
area_km2 = 0.25
l = 4
m = 8
k = 10

[protocol]
tau_p = 4
t = 200
q = 2
eta = 1.0

[mc]
n_layouts = 2
n_realizations = 5
seed = 7
"#;

fn write_tiny(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.toml");
    fs::write(&path, TINY).unwrap();
    path
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn help_exits_zero() {
    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success(), "--help failed: {}", stderr_of(&out));
    let text = stdout_of(&out);
    for sub in ["layout", "run", "sweep", "srs-estimate", "report"] {
        assert!(text.contains(sub), "help does not mention `{sub}`");
    }
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = bin()
        .args(["run", "--config", "/nonexistent/nowhere.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("nowhere.toml"));
}

#[test]
fn invalid_config_is_a_usage_error() {
    let dir = scratch("invalid");
    let path = dir.join("bad.toml");
    fs::write(&path, "[geometry]\nl = 0\n").unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr_of(&out));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn run_writes_both_artifacts_with_embedded_hash() {
    let dir = scratch("run");
    let cfg = write_tiny(&dir);
    let out_dir = dir.join("out");
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let csv = fs::read_to_string(out_dir.join("users.csv")).unwrap();
    assert!(csv.starts_with("# config_hash="));
    assert!(csv.contains("ue_id,rate_bps_hz,se_bps_hz,outage"));
    let json = fs::read_to_string(out_dir.join("summary.json")).unwrap();
    let hash_in_csv = csv.lines().next().unwrap().trim_start_matches("# config_hash=");
    assert!(
        json.contains(hash_in_csv),
        "summary does not carry the same config hash"
    );
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn parallelism_does_not_change_output_bytes() {
    let dir = scratch("parallel");
    let cfg = write_tiny(&dir);
    let run = |threads: &str, sub: &str| -> (Vec<u8>, Vec<u8>) {
        let out_dir = dir.join(sub);
        let out = bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .args(["--parallel", threads, "--out-dir"])
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
        (
            fs::read(out_dir.join("users.csv")).unwrap(),
            fs::read(out_dir.join("summary.json")).unwrap(),
        )
    };
    let (csv1, json1) = run("1", "serial");
    let (csv2, json2) = run("2", "wide");
    assert!(csv1 == csv2, "users.csv differs between --parallel 1 and 2");
    assert!(json1 == json2, "summary.json differs between --parallel 1 and 2");
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn seed_override_changes_the_config_hash() {
    let dir = scratch("seed");
    let cfg = write_tiny(&dir);
    let hash_with = |extra: &[&str], sub: &str| -> String {
        let out_dir = dir.join(sub);
        let mut c = bin();
        c.args(["run", "--config"])
            .arg(&cfg)
            .arg("--out-dir")
            .arg(&out_dir)
            .args(["--format", "csv"]);
        c.args(extra);
        let out = c.output().unwrap();
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
        let csv = fs::read_to_string(out_dir.join("users.csv")).unwrap();
        csv.lines().next().unwrap().trim_start_matches("# config_hash=").to_string()
    };
    let baseline = hash_with(&[], "base");
    let reseeded = hash_with(&["--seed", "99"], "reseeded");
    let same_seed = hash_with(&["--seed", "7"], "same");
    assert_ne!(baseline, reseeded, "seed override must change the hash");
    assert_eq!(baseline, same_seed, "explicit default seed must not");
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn report_verifies_the_config_hash() {
    let dir = scratch("report");
    let cfg = write_tiny(&dir);
    let out_dir = dir.join("out");
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    // Matching config: accepted.
    let out = bin()
        .arg("report")
        .arg("--out-dir")
        .arg(&out_dir)
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert!(stdout_of(&out).contains("verified"));

    // A config with a different seed: rejected.
    let other = dir.join("other.toml");
    fs::write(&other, TINY.replace("seed = 7", "seed = 8")).unwrap();
    let out = bin()
        .arg("report")
        .arg("--out-dir")
        .arg(&out_dir)
        .arg("--config")
        .arg(&other)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "stdout: {}", stdout_of(&out));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn layout_and_sounding_dumps_are_written() {
    let dir = scratch("dumps");
    let cfg = write_tiny(&dir);
    let out_dir = dir.join("out");

    let out = bin()
        .args(["layout", "--index", "1", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let layout = fs::read_to_string(out_dir.join("layout.json")).unwrap();
    assert!(layout.contains("\"cluster_sizes\"") || layout.contains("cluster"));

    let out = bin()
        .args(["srs-estimate", "--index", "0", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let survey = fs::read_to_string(out_dir.join("srs.json")).unwrap();
    assert!(survey.contains("power_efficiency"));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn sweep_writes_table_and_timing_sidecar() {
    let dir = scratch("sweep");
    let spec = dir.join("sweep.toml");
    // Wrap the tiny config as the sweep base with a 2x2 grid.
    let text = format!(
        "[sweep]\ngroup_by = [\"l\"]\n[sweep.values]\nl = [2, 4]\nm = [4, 8]\n[base]\n{}",
        TINY.replace("[geometry]", "[base.geometry]")
            .replace("[protocol]", "[base.protocol]")
            .replace("[mc]", "[base.mc]")
    );
    fs::write(&spec, text).unwrap();
    let out_dir = dir.join("out");
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&spec)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("# spec_hash="));
    assert_eq!(csv.lines().count(), 2 + 4, "expected 4 sweep rows");
    assert!(out_dir.join("sweep.json").exists());
    assert!(out_dir.join("timing.log").exists());
    fs::remove_dir_all(&dir).unwrap();
}
