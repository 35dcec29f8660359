use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use relaxns::cli::verify_manifest;
use tempfile::TempDir;

const SMALL_RUN: &str = r#"{
  "grid": {"dim": 2, "n": 16},
  "time": {"T": 0.02, "dt": 1e-3},
  "physics": {"delta": 0.02},
  "initial_data": {"theorem": "thm21"},
  "diagnostics": {"identity": true},
  "output": {"formats": ["csv", "json", "snapshot"]}
}"#;

fn relaxns(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relaxns"))
        .args(args)
        .env_remove("RELAXNS_THREADS")
        .output()
        .expect("spawn relaxns")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_error(o: &Output, code: i32, class: &str) {
    assert_eq!(o.status.code(), Some(code), "{}", stderr(o));
    let line = stderr(o);
    assert!(
        line.starts_with(&format!("error class={class} exit={code}: ")),
        "{line}"
    );
    assert_eq!(line.trim_end().lines().count(), 1, "{line}");
}

#[test]
fn check_passes_and_manifest_verifies() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("check");
    let o = relaxns(&["check", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("check.json").exists());
    assert!(verify_manifest(&out).unwrap().is_empty());
}

#[test]
fn run_relax_writes_artifacts_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.json", SMALL_RUN);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let o = relaxns(&["run-relax", "--config", &cfg, "--out", dir.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in [
        "config.json",
        "trajectory.csv",
        "reference.csv",
        "energy.csv",
        "certificate.json",
        "summary.json",
        "bounds.json",
        "final_p.bin",
        "final_u.bin",
        "final_stress.bin",
        "manifest.json",
        "timings.json",
    ] {
        assert!(a.join(name).exists(), "missing {name}");
    }
    assert!(verify_manifest(&a).unwrap().is_empty());
    assert_eq!(
        fs::read(a.join("manifest.json")).unwrap(),
        fs::read(b.join("manifest.json")).unwrap()
    );
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(a.join("summary.json")).unwrap()).unwrap();
    assert!(summary["identity"]["max"].as_f64().unwrap() < 1e-2);
    let header = fs::read_to_string(a.join("trajectory.csv")).unwrap();
    assert!(header.starts_with("t,in_layer,u_l2,p_l2,stress_l2,div_u_l2,u_linf\n"));
}

#[test]
fn seed_override_changes_ill_prepared_data() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "ill.json",
        r#"{"grid": {"dim": 2, "n": 16}, "time": {"T": 0.005, "dt": 1e-3},
            "physics": {"delta": 0.01}, "initial_data": {"theorem": "thm23", "preparation": "ill_prepared"},
            "output": {"formats": ["json"]}}"#,
    );
    let mut digests = Vec::new();
    for seed in ["1", "2"] {
        let out = tmp.path().join(seed);
        let o = relaxns(&[
            "run-relax",
            "--config",
            &cfg,
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        digests.push(fs::read(out.join("certificate.json")).unwrap());
    }
    assert_ne!(digests[0], digests[1]);
}

#[test]
fn run_affine_and_run_ns() {
    let tmp = TempDir::new().unwrap();
    let relax = SMALL_RUN.replace(r#""identity": true"#, r#""identity": false"#);
    let cfg = write_config(tmp.path(), "affine.json", &relax);
    let out = tmp.path().join("affine");
    let o = relaxns(&["run-affine", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(verify_manifest(&out).unwrap().is_empty());

    let cfg = write_config(tmp.path(), "identity.json", SMALL_RUN);
    let o = relaxns(&["run-affine", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_error(&o, 2, "config");

    let ns = write_config(
        tmp.path(),
        "ns.json",
        r#"{"grid": {"dim": 3, "n": 8}, "time": {"T": 0.01, "dt": 1e-3},
            "output": {"formats": ["csv", "json", "snapshot"]}}"#,
    );
    let out = tmp.path().join("ns");
    let o = relaxns(&["run-ns", "--config", &ns, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["ns_trajectory.csv", "ns_summary.json", "final_u.bin"] {
        assert!(out.join(name).exists(), "missing {name}");
    }
}

#[test]
fn sweep_then_emit_plots() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sweep.json",
        r#"{"grid": {"dim": 2, "n": 16}, "time": {"T": 0.02},
            "physics": {"ladder": [0.04, 0.01, 0.004, 0.001]},
            "initial_data": {"theorem": "thm21"},
            "sweep": {"metrics": ["u_l2", "u_h1"]}}"#,
    );
    let out = tmp.path().join("sweep");
    let o = relaxns(&[
        "sweep",
        "--config",
        &cfg,
        "--threads",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(verify_manifest(&out).unwrap().is_empty());
    let report = out.join("report.json");
    let o = relaxns(&["emit-plots", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let plots = out.join("plots");
    assert!(verify_manifest(&plots).unwrap().is_empty());
    assert!(fs::read_dir(&plots).unwrap().count() > 2);
}

#[test]
fn short_ladder_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "ladder.json",
        r#"{"grid": {"dim": 2, "n": 16}, "time": {"T": 0.02},
            "physics": {"ladder": [0.01]}, "initial_data": {"theorem": "thm21"}}"#,
    );
    let o = relaxns(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_error(&o, 2, "config");
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        r#"{"grid": {"dim": 2, "n": 16, "m": 3}, "time": {"T": 0.02}}"#,
    );
    let o = relaxns(&[
        "run-ns",
        "--config",
        &cfg,
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_error(&o, 2, "config");
}

#[test]
fn missing_config_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nope.json");
    let o = relaxns(&["run-ns", "--config", missing.to_str().unwrap()]);
    assert_error(&o, 4, "io");
}

#[test]
fn bad_thread_env_is_a_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_relaxns"))
        .args(["check"])
        .env("RELAXNS_THREADS", "many")
        .output()
        .unwrap();
    assert_error(&o, 2, "config");
}

#[test]
fn blow_up_exits_with_divergence_code() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "div.json",
        r#"{"grid": {"dim": 2, "n": 16}, "time": {"T": 0.3, "dt": 0.0025},
            "physics": {"delta": 0.01, "epsilon": 0.1},
            "initial_data": {"theorem": "thm21", "preparation": "ill_prepared",
                             "base_flow": {"kind": "taylor_green", "amplitude": 20}}}"#,
    );
    let out = tmp.path().join("o");
    let o = relaxns(&["run-relax", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_error(&o, 3, "diverged");
    assert!(verify_manifest(&out).unwrap().is_empty());
}
