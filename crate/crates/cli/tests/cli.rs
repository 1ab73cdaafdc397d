//! End-to-end subcommand tests.
//!
//! Most cases drive the CLI in-process through [`edpmvc_cli::run`]; exit
//! codes and the `EDPMVC_SEED` environment default go through the real
//! binary, since process exit and environment are what they are about.

use std::fs;
use std::path::Path;
use std::process::Command;

use clap::Parser;
use edpmvc_cli::commands::GenerateManifest;
use edpmvc_cli::{run, Cli, CliError};
use edpmvc_core::data::Dataset;
use tempfile::TempDir;

fn edpmvc(args: &[&str]) -> Result<(), CliError> {
    let mut argv = vec!["edpmvc"];
    argv.extend_from_slice(args);
    run(Cli::try_parse_from(argv).expect("argument parse"))
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_edpmvc"))
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

/// Recursively collects (relative path, bytes) for every file under `dir`.
fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in fs::read_dir(dir).expect("read_dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).expect("prefix").display().to_string();
                out.push((rel, fs::read(&path).expect("read file")));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

#[test]
fn generate_writes_dataset_and_exact_manifest() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("data.jsonl");
    edpmvc(&[
        "generate", "--views", "4", "--classes", "3", "--n", "100", "--eta", "0.25", "--seed",
        "3", "--out", out.to_str().unwrap(),
    ])
    .unwrap();

    let ds = Dataset::load(&out).unwrap();
    assert_eq!(ds.len(), 100);
    assert_eq!(ds.num_views(), 4);
    assert_eq!(ds.n_classes, 3);
    // 0.25 of 400 slots is exactly 100 removals, so the realized rate is exact.
    assert_eq!(ds.missing_rate(), 0.25);

    let manifest: GenerateManifest =
        serde_json::from_str(&read(&tmp.path().join("data.jsonl.manifest.json"))).unwrap();
    assert_eq!(manifest.seed, 3);
    assert_eq!(manifest.eta_requested, 0.25);
    assert_eq!(manifest.eta_realized, 0.25);
    assert_eq!(manifest.dims, vec![4, 4, 4, 4]);
    assert!(manifest.corruption.is_none());
}

#[test]
fn generate_rejects_eta_beyond_bound() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("bad.jsonl");
    let status = bin()
        .args(["generate", "--views", "2", "--eta", "0.8", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));
    assert!(!out.exists(), "a rejected invocation must write nothing");
}

#[test]
fn generate_honors_seed_env_default() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("env.jsonl");
    let output = bin()
        .env("EDPMVC_SEED", "42")
        .args(["generate", "--n", "30", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let manifest: GenerateManifest =
        serde_json::from_str(&read(&tmp.path().join("env.jsonl.manifest.json"))).unwrap();
    assert_eq!(manifest.seed, 42);
}

#[test]
fn generate_records_corruption_spec() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("noisy.jsonl");
    edpmvc(&[
        "generate", "--n", "40", "--seed", "1", "--corrupt", "gaussian:view=1:scale=2.5",
        "--out", out.to_str().unwrap(),
    ])
    .unwrap();
    let manifest: GenerateManifest =
        serde_json::from_str(&read(&tmp.path().join("noisy.jsonl.manifest.json"))).unwrap();
    let spec = manifest.corruption.expect("corruption block");
    assert_eq!(spec.target_views, vec![1]);
    assert_eq!(spec.noise_scale, 2.5);
}

#[test]
fn train_layout_rerun_identity_and_eval_round_trip() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data.jsonl");
    edpmvc(&[
        "generate", "--n", "120", "--classes", "3", "--eta", "0.2", "--seed", "9", "--out",
        data.to_str().unwrap(),
    ])
    .unwrap();

    let train = |dir: &Path| {
        edpmvc(&[
            "train", "--data", data.to_str().unwrap(), "--seeds", "1,2", "--epochs", "6",
            "--out", dir.to_str().unwrap(),
        ])
        .unwrap()
    };
    let run_a = tmp.path().join("run-a");
    train(&run_a);

    for rel in [
        "manifest.json",
        "metrics.csv",
        "seed-1/config.json",
        "seed-1/view-0.bin",
        "seed-1/view-1.bin",
        "seed-1/view-2.bin",
        "seed-1/fusion.json",
        "seed-1/centers.json",
        "seed-1/epochs.csv",
        "seed-2/config.json",
    ] {
        assert!(run_a.join(rel).exists(), "missing {rel}");
    }
    let metrics = read(&run_a.join("metrics.csv"));
    assert_eq!(metrics.lines().count(), 1 + 2 + 1, "header, 2 seeds, aggregate");

    // Same invocation, different directory: every artifact byte-identical.
    let run_b = tmp.path().join("run-b");
    train(&run_b);
    assert_eq!(dir_contents(&run_a), dir_contents(&run_b));

    // Evaluating the run on its own training data reproduces metrics.csv.
    let eval_csv = tmp.path().join("eval.csv");
    edpmvc(&[
        "eval", "--run", run_a.to_str().unwrap(), "--data", data.to_str().unwrap(), "--out",
        eval_csv.to_str().unwrap(),
    ])
    .unwrap();
    assert_eq!(read(&eval_csv), metrics);

    // A seed subset keeps only that seed's row (plus the aggregate).
    let sub_csv = tmp.path().join("eval-sub.csv");
    edpmvc(&[
        "eval", "--run", run_a.to_str().unwrap(), "--data", data.to_str().unwrap(), "--seeds",
        "2", "--out", sub_csv.to_str().unwrap(),
    ])
    .unwrap();
    let sub = read(&sub_csv);
    assert_eq!(sub.lines().count(), 3);
    assert!(sub.contains("seed,discount,2,"));
    assert!(!sub.contains("seed,discount,1,"));
}

#[test]
fn eval_rejects_unknown_seed() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data.jsonl");
    edpmvc(&["generate", "--n", "60", "--seed", "4", "--out", data.to_str().unwrap()]).unwrap();
    let run_dir = tmp.path().join("run");
    edpmvc(&[
        "train", "--data", data.to_str().unwrap(), "--seeds", "5", "--epochs", "3", "--out",
        run_dir.to_str().unwrap(),
    ])
    .unwrap();
    let err = edpmvc(&[
        "eval", "--run", run_dir.to_str().unwrap(), "--data", data.to_str().unwrap(),
        "--seeds", "99",
    ])
    .unwrap_err();
    match err {
        CliError::Usage(msg) => assert!(msg.contains("99")),
        other => panic!("expected usage error, got {other:?}"),
    }
}

#[test]
fn train_without_data_exits_2_and_writes_nothing() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("never");
    let output = bin()
        .args(["train", "--data", "/nonexistent/x.jsonl", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(!out_dir.exists(), "a failed run must not leave a partial report");
}

#[test]
fn sweep_emits_one_row_per_cell_and_reruns_identically() {
    let tmp = TempDir::new().unwrap();
    let sweep = |dir: &Path| {
        edpmvc(&[
            "sweep", "--views", "2", "--classes", "2", "--n", "80", "--eta-grid", "0,0.3",
            "--p-grid", "2,4", "--seeds", "1,2", "--epochs", "4", "--out",
            dir.to_str().unwrap(),
        ])
        .unwrap()
    };
    let dir_a = tmp.path().join("sweep-a");
    sweep(&dir_a);
    let csv = read(&dir_a.join("sweep.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 4, "header plus 2 etas x 2 ramps");
    assert_eq!(
        lines[0],
        "eta,p,q,fusion,seeds,accuracy_mean,accuracy_std,uncertainty_mean"
    );
    assert!(lines[1].starts_with("0,2,1,discount,1;2,"));
    assert!(lines[4].starts_with("0.3,4,1,discount,1;2,"));

    let dir_b = tmp.path().join("sweep-b");
    sweep(&dir_b);
    assert_eq!(read(&dir_b.join("sweep.csv")), csv);
    assert_eq!(
        read(&dir_b.join("manifest.json")),
        read(&dir_a.join("manifest.json"))
    );
}

#[test]
fn fuse_demo_prints_every_step_and_exits_zero() {
    let output = bin().arg("fuse-demo").output().unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    for label in ["m12 ", "m123 ", "m1234 ", "m12345 "] {
        assert!(stdout.contains(label), "missing step {label:?}");
    }
    assert!(stdout.contains("agrees"));
    assert!(stdout.contains("DIVERGES"));
}

#[test]
fn help_and_version_exit_zero() {
    for flag in ["--help", "--version"] {
        let output = bin().arg(flag).output().unwrap();
        assert_eq!(output.status.code(), Some(0), "{flag}");
    }
    let output = bin().arg("definitely-not-a-subcommand").output().unwrap();
    assert_eq!(output.status.code(), Some(1));
}
