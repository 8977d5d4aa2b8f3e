//! End-to-end checks of the command-line surface on tiny budgets.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hadmimo"))
        .args(args)
        .output()
        .expect("spawn hadmimo")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn field<'a>(out: &'a str, key: &str) -> &'a str {
    out.lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap_or_else(|| panic!("no `{key}` line in:\n{out}"))
        .trim()
}

#[test]
fn gen_dataset_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.ds");
    let b = dir.path().join("b.ds");
    let c = dir.path().join("c.ds");
    let base = ["gen-dataset", "--n", "16", "--m", "2", "--count", "40", "--seed", "7", "--out"];

    for out in [&a, &b] {
        let run = run(&[&base[..], &[out.to_str().unwrap()]].concat());
        assert!(run.status.success(), "{}", text(&run.stderr));
    }
    let again = run(&[
        "gen-dataset", "--n", "16", "--m", "2", "--count", "40", "--seed", "8", "--out",
        c.to_str().unwrap(),
    ]);
    assert!(again.status.success());

    let (va, vb, vc) = (fs::read(&a).unwrap(), fs::read(&b).unwrap(), fs::read(&c).unwrap());
    assert_eq!(va, vb, "same flags must give byte-identical files");
    assert_ne!(va, vc, "different seeds must give different payloads");
}

#[test]
fn gen_dataset_rejects_inverted_region() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "gen-dataset", "--region-start", "15", "--region-end", "10", "--gps-err-deg", "0",
        "--out", dir.path().join("x.ds").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).starts_with("error:"), "stderr: {}", text(&out.stderr));
}

#[test]
fn registry_round_trip_select_and_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let reg = dir.path().join("registry");
    let trained = run(&[
        "train-all", "--n", "16", "--m", "2", "--r", "4", "--beta-deg", "5", "--channels", "60",
        "--max-epochs", "1", "--seed", "3", "--out", reg.to_str().unwrap(),
    ]);
    assert!(trained.status.success(), "{}", text(&trained.stderr));
    assert!(reg.join("registry.json").exists() && reg.join("region_17.model").exists());

    let sel = run(&["select", "--az-deg", "12", "--registry", reg.to_str().unwrap()]);
    assert!(sel.status.success(), "{}", text(&sel.stderr));
    let out = text(&sel.stdout);
    assert_eq!(field(&out, "region_index:"), "2");
    assert_eq!(field(&out, "conjugate:"), "false");
    assert!(Path::new(field(&out, "model_path:")).exists(), "model path must exist");

    let mirrored = run(&["select", "--az-deg", "-52", "--registry", reg.to_str().unwrap()]);
    let out = text(&mirrored.stdout);
    assert_eq!(field(&out, "region_index:"), "10");
    assert_eq!(field(&out, "conjugate:"), "true");
    assert!(field(&out, "model_path:").ends_with("region_10.model"));

    let est = run(&[
        "estimate", "--n", "16", "--m", "2", "--az-deg", "-52", "--count", "10", "--seed", "5",
        "--registry", reg.to_str().unwrap(),
    ]);
    assert!(est.status.success(), "{}", text(&est.stderr));
    let out = text(&est.stdout);
    assert_eq!(field(&out, "conjugate:"), "true");
    let nmse: f64 = field(&out, "nmse:").parse().unwrap();
    assert!(nmse.is_finite() && nmse > 0.0, "nmse {nmse}");
}

#[test]
fn train_then_energy_profile() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("tile.model");
    let trained = run(&[
        "train", "--n", "16", "--m", "2", "--r", "4", "--channels", "60", "--max-epochs", "1",
        "--seed", "3", "--out", model.to_str().unwrap(),
    ]);
    assert!(trained.status.success(), "{}", text(&trained.stderr));

    let prof = run(&[
        "energy-profile", "--n", "16", "--model", model.to_str().unwrap(), "--n-mc", "200",
        "--seed", "1",
    ]);
    assert!(prof.status.success(), "{}", text(&prof.stderr));
    let csv = text(&prof.stdout);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("bin,eta,learned_energy,conventional_energy,mean_abs_x"));
    assert_eq!(lines.count(), 16, "one row per angular bin");
    assert!(text(&prof.stderr).contains("fraction_in_region:"));
}

#[test]
fn select_reports_missing_registry() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let out = run(&["select", "--az-deg", "5", "--registry", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.starts_with("error:") && err.contains("nope"), "stderr: {err}");
}

#[test]
fn bad_arguments_exit_with_usage_code() {
    let unknown_flag = run(&["gen-dataset", "--nope", "--out", "x.ds"]);
    assert_eq!(unknown_flag.status.code(), Some(2));
    let unknown_experiment = run(&["bench", "fig9"]);
    assert_eq!(unknown_experiment.status.code(), Some(2));
}
