//! End-to-end runs of the `tempolearn` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tempolearn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tempolearn"))
        .args(args)
        .current_dir(dir)
        .env_remove("TEMPOLEARN_OUT")
        .env_remove("TEMPOLEARN_MNIST")
        .output()
        .unwrap()
}

const MINIMAL: &str = r#"
[dataset]
items_per_category = 40

[model]
hidden = 6

[training]
runs = 2
eval_every = 20
end_window = 40
"#;

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn minimal_config_trains_and_writes_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", MINIMAL);
    let out = tempolearn(&["train", "--config", &cfg, "--seed", "3", "--out", "res"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let curves = fs::read_to_string(tmp.path().join("res/curves.csv")).unwrap();
    let mut lines = curves.lines();
    assert_eq!(lines.next().unwrap(), "run,condition,iteration,samples_seen,train_loss,test_loss,test_acc");
    let runs: std::collections::BTreeSet<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(runs.into_iter().collect::<Vec<_>>(), ["0", "1"]);
    let summary = fs::read_to_string(tmp.path().join("res/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn training_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", MINIMAL);
    let read = |out: &str, seed: &str| {
        let o = tempolearn(&["train", "--config", &cfg, "--seed", seed, "--out", out], tmp.path());
        assert!(o.status.success());
        fs::read(tmp.path().join(out).join("curves.csv")).unwrap()
    };
    assert_eq!(read("a", "5"), read("b", "5"));
    assert_ne!(read("a", "5"), read("c", "6"));
}

#[test]
fn leak_alpha_count_mismatch_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "[model]\nhidden = 3\nleak_alphas = [0.0, 0.5]\n");
    let out = tempolearn(&["train", "--config", &cfg, "--out", "res"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.leak_alphas"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "[training]\nepoch = 2\n");
    let out = tempolearn(&["train", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generate_writes_sets_and_schedule() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg =
        write_config(tmp.path(), "gen.toml", "[dataset]\nitems_per_category = 10\n[schedule]\ncondition = \"k3\"\n");
    let out = tempolearn(&["generate", "--config", &cfg, "--seed", "1", "--out", "data"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let schedule = fs::read_to_string(tmp.path().join("data/schedule.csv")).unwrap();
    assert_eq!(schedule.lines().next().unwrap(), "position,sample_index,category,boundary");
    // 4 categories x 8 training items
    assert_eq!(schedule.lines().count(), 33);
    assert!(tmp.path().join("data/train.csv").exists());
    assert!(tmp.path().join("data/test.csv").exists());
}

#[test]
fn list_presets_and_unknown_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tempolearn(&["list-presets"], tmp.path());
    assert!(out.status.success());
    let ids: Vec<String> = String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| l.split_whitespace().next().unwrap().to_string())
        .collect();
    for id in ["fig2a", "fig2b", "fig2c", "fig3", "a13"] {
        assert!(ids.iter().any(|i| i == id), "{id} missing from {ids:?}");
    }
    let out = tempolearn(&["run", "nope"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}

#[test]
fn small_preset_run_writes_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tempolearn(&["run", "fig2b", "--seed", "2", "--runs", "3", "--out", "res"], tmp.path());
    assert!(matches!(out.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("PASS fig2b") || stdout.starts_with("FAIL fig2b"), "{stdout}");
    let checks = fs::read_to_string(tmp.path().join("res/fig2b/checks.csv")).unwrap();
    assert_eq!(checks.lines().next().unwrap(), "check,passed,detail");
    assert!(tmp.path().join("res/fig2b/summary.csv").exists());
}
