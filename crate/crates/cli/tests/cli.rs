use std::path::{Path, PathBuf};
use std::process::Command;

const TINY: &str = r#"{
  "seed": 11, "output_dir": "out",
  "dataset": {"n": 240, "noise": 0.05},
  "train_size": 160,
  "autoencoder": {"architecture": {"hidden": [12], "latent_dim": 2}, "models": 2,
                  "training": {"epochs": 5, "batch_size": 32, "learning_rate": 0.001}},
  "diet": {"hidden": [8], "training": {"epochs": 3, "batch_size": 32, "learning_rate": 0.01}},
  "anchors": {"k": 8, "repeats": 2, "sweep": [2, 8]},
  "geodesic_compare": {"per_label": 1, "oracle": {"steps": 8, "iters": 20, "learning_rate": 0.01}}
}"#;

const PIPELINE: [&str; 9] = [
    "synth",
    "train-ae",
    "train-diet",
    "relrep",
    "retrieve",
    "geodesic-compare",
    "align",
    "stitch",
    "anchor-sweep",
];

fn relgeo(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_relgeo"))
        .args(args)
        .env_remove("RELGEO_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("cfg.json");
    std::fs::write(&path, TINY).unwrap();
    path
}

fn run_pipeline(cfg: &Path) {
    for cmd in PIPELINE {
        let out = relgeo(&[cmd, "--config", cfg.to_str().unwrap()]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn result_files(root: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                if !p.ends_with("manifests") {
                    stack.push(p);
                }
            } else {
                files.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    files.sort();
    files
}

#[test]
fn pipeline_is_deterministic_and_complete() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ca, cb) = (write_config(a.path()), write_config(b.path()));
    run_pipeline(&ca);
    run_pipeline(&cb);
    let (ra, rb) = (a.path().join("out"), b.path().join("out"));

    let files = result_files(&ra);
    assert_eq!(files, result_files(&rb));
    assert!(files.len() > 20);
    for f in &files {
        let (x, y) = (std::fs::read(ra.join(f)).unwrap(), std::fs::read(rb.join(f)).unwrap());
        assert!(x == y, "{} differs between identical runs", f.display());
    }

    for cmd in PIPELINE {
        let m = json(&ra.join("manifests").join(format!("{cmd}.json")));
        assert_eq!(m["seed"], 11);
        assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
        assert!(m["timestamp"].is_string());
    }
    let sweep = std::fs::read_to_string(ra.join("results/anchor_sweep.csv")).unwrap();
    assert_eq!(sweep.lines().next().unwrap(), "k,method,mean,std,rep_0,rep_1");
    assert_eq!(sweep.lines().count(), 5);
    let stitch = json(&ra.join("results/stitch.json"));
    assert!(stitch["stitched_mse"].as_f64().unwrap().is_finite());
    let cmp = json(&ra.join("results/geodesic_compare.json"));
    assert_eq!(cmp["points"], 10);
}

#[test]
fn seed_override_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let c = cfg.to_str().unwrap();
    assert!(relgeo(&["synth", "--config", c]).status.success());
    let other = dir.path().join("other");
    assert!(relgeo(&["synth", "--config", c, "--seed", "12", "--out", other.to_str().unwrap()])
        .status
        .success());
    let x1 = std::fs::read(dir.path().join("out/data/train_x.rgem")).unwrap();
    let x2 = std::fs::read(other.join("data/train_x.rgem")).unwrap();
    assert_ne!(x1, x2);
    assert_eq!(json(&other.join("manifests/synth.json"))["seed"], 12);
}

#[test]
fn retrieving_a_file_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let c = cfg.to_str().unwrap();
    for cmd in ["synth", "train-ae", "relrep"] {
        assert!(relgeo(&[cmd, "--config", c]).status.success());
    }
    let same = r#"{"seed": 11, "output_dir": "out", "dataset": {"n": 240}, "train_size": 160,
                   "retrieve": {"source": "out/relrep/ae-0.rgem", "target": "out/relrep/ae-0.rgem"}}"#;
    let cfg2 = dir.path().join("same.json");
    std::fs::write(&cfg2, same).unwrap();
    let out = relgeo(&["retrieve", "--config", cfg2.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&dir.path().join("out/results/retrieve.json"))["mrr"], 1.0);
}

#[test]
fn missing_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("empty");
    for cmd in ["train-ae", "relrep", "retrieve", "stitch", "anchor-sweep"] {
        let out = relgeo(&[cmd, "--out", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{cmd}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("missing input"));
    }
    let out = relgeo(&["synth", "--config", dir.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn corrupt_inputs_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let c = cfg.to_str().unwrap();
    assert!(relgeo(&["synth", "--config", c]).status.success());
    let x = dir.path().join("out/data/train_x.rgem");
    let mut bytes = std::fs::read(&x).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    std::fs::write(&x, bytes).unwrap();
    let out = relgeo(&["train-ae", "--config", c]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let bad_cfg = dir.path().join("bad.json");
    std::fs::write(&bad_cfg, r#"{"seed": 1, "colour": "blue"}"#).unwrap();
    assert_eq!(relgeo(&["synth", "--config", bad_cfg.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn invalid_settings_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = relgeo(&["synth", "--out", dir.path().to_str().unwrap(), "--anchors", "5", "--steps", "0"]);
    assert_eq!(out.status.code(), Some(1));
}
