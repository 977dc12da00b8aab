use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use serde_json::json;
use tempfile::{tempdir, TempDir};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_vlattack"));
    c.env_remove("VLATTACK_WORKERS");
    c
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn ok(o: Output) -> Output {
    assert_eq!(code(&o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    o
}

/// The run directory announced on stderr, resolved against the child's cwd.
fn run_dir(o: &Output, cwd: &Path) -> PathBuf {
    let err = String::from_utf8_lossy(&o.stderr);
    let line = err.lines().find_map(|l| l.strip_prefix("run directory: ")).expect("run directory line");
    cwd.join(line)
}

fn write(dir: &Path, name: &str, v: serde_json::Value) -> String {
    std::fs::write(dir.join(name), serde_json::to_string_pretty(&v).unwrap()).unwrap();
    name.to_string()
}

struct Workspace {
    tmp: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let w = Self { tmp: tempdir().unwrap() };
        let p = w.path();
        for (kind, seed, n, out, vocab) in [
            ("classification", "1", "120", "train.jsonl", "vocab.json"),
            ("classification", "2", "30", "test.jsonl", "vocab.json"),
        ] {
            ok(run(&["synth", kind, "--seed", seed, "--n", n, "--out", out, "--vocab-out", vocab], p));
        }
        write(
            p,
            "train.json",
            json!({
                "vocab": "vocab.json", "train_data": "train.jsonl", "test_data": "test.jsonl",
                "arch": {"dim": 16, "ffn_dim": 32, "layers": 1},
                "train": {"epochs": 2, "seed": 7}
            }),
        );
        w
    }

    fn path(&self) -> &Path {
        self.tmp.path()
    }

    fn train(&self) -> PathBuf {
        run_dir(&ok(run(&["train", "--config", "train.json"], self.path())), self.path())
    }
}

#[test]
fn classification_pipeline_end_to_end() {
    let start = Instant::now();
    let w = Workspace::new();
    let p = w.path();
    let trained = w.train();
    for f in ["config.json", "model.vlat", "metrics.json", "report.txt", "report.csv"] {
        assert!(trained.join(f).is_file(), "{f}");
    }
    let model = trained.join("model.vlat");
    write(
        p,
        "attack.json",
        json!({
            "vocab": "vocab.json", "model": model, "data": "test.jsonl",
            "attack": {"top_k": 8, "seed": 3}, "baselines": true
        }),
    );
    let a = run_dir(&ok(run(&["attack", "--config", "attack.json"], p)), p);
    let b = run_dir(&ok(run(&["attack", "--config", "attack.json", "--workers", "3"], p)), p);
    assert_ne!(a, b);
    let ma = std::fs::read(a.join("metrics.json")).unwrap();
    assert_eq!(ma, std::fs::read(b.join("metrics.json")).unwrap());
    assert_eq!(std::fs::read(a.join("attacks.jsonl")).unwrap(), std::fs::read(b.join("attacks.jsonl")).unwrap());
    let metrics: serde_json::Value = serde_json::from_slice(&ma).unwrap();
    assert_eq!(metrics["metrics"]["rows"].as_array().unwrap().len(), 4);
    let snapshot: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("config.json")).unwrap()).unwrap();
    assert_eq!(snapshot["config_hash"], metrics["config_hash"]);
    let hash = metrics["config_hash"].as_str().unwrap();
    assert!(a.file_name().unwrap().to_str().unwrap().ends_with(&hash[..12]));
    for line in std::fs::read_to_string(a.join("attacks.jsonl")).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["config_hash"], hash);
    }
    let csv = std::fs::read_to_string(a.join("report.csv")).unwrap();
    assert!(csv.starts_with("Model,Ori Acc,Att Acc,Perturb%,Sim,config_hash\n"));

    write(
        p,
        "adv.json",
        json!({
            "vocab": "vocab.json", "model": model, "train_data": "train.jsonl", "test_data": "test.jsonl",
            "attack": {"top_k": 8}, "train": {"epochs": 2, "seed": 7}
        }),
    );
    let adv = run_dir(&ok(run(&["advtrain", "--config", "adv.json"], p)), p);
    let aug = std::fs::read_to_string(adv.join("augmented.jsonl")).unwrap();
    let train_lines = std::fs::read_to_string(p.join("train.jsonl")).unwrap();
    let train_lines: Vec<&str> = train_lines.lines().collect();
    for line in aug.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        if let Some(src) = v["provenance"].as_u64() {
            let source: serde_json::Value = serde_json::from_str(train_lines[src as usize - 1]).unwrap();
            assert_eq!(v["label"], source["label"]);
        }
    }

    std::fs::remove_file(adv.join("report.txt")).unwrap();
    let out = ok(run(&["report", adv.to_str().unwrap()], p));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Clean Acc") && text.contains("adv-finetuned"));
    assert_eq!(std::fs::read_to_string(adv.join("report.txt")).unwrap(), text);
    assert!(start.elapsed() < Duration::from_secs(600));
}

#[test]
fn inputs_are_not_modified() {
    let w = Workspace::new();
    let before = std::fs::read(w.path().join("train.jsonl")).unwrap();
    w.train();
    assert_eq!(std::fs::read(w.path().join("train.jsonl")).unwrap(), before);
}

#[test]
fn config_errors_exit_with_2() {
    let w = Workspace::new();
    let p = w.path();
    assert_eq!(code(&run(&["train", "--config", "missing.json"], p)), 2);
    std::fs::write(p.join("broken.json"), "{").unwrap();
    assert_eq!(code(&run(&["train", "--config", "broken.json"], p)), 2);
    write(p, "unknown.json", json!({"vocab": "vocab.json", "train_data": "train.jsonl", "bogus": 1}));
    assert_eq!(code(&run(&["train", "--config", "unknown.json"], p)), 2);
    assert_eq!(code(&run(&["train", "--config", "train.json", "--set", "train={\"lr\":-1.0}"], p)), 2);
    assert_eq!(code(&run(&["train", "--config", "train.json", "--set", "nokey"], p)), 2);
    assert_eq!(code(&run(&["train"], p)), 2);
    let empty = tempdir().unwrap();
    assert_eq!(code(&run(&["report", empty.path().to_str().unwrap()], p)), 2);
}

#[test]
fn resume_requires_a_matching_config() {
    let w = Workspace::new();
    let p = w.path();
    let dir = w.train();
    let d = dir.to_str().unwrap();
    ok(run(&["train", "--config", "train.json", "--resume", d], p));
    let changed = run(&["train", "--config", "train.json", "--resume", d, "--set", "train={\"epochs\":3,\"seed\":7}"], p);
    assert_eq!(code(&changed), 2);
    assert!(String::from_utf8_lossy(&changed.stderr).contains("refusing to resume"));
}

#[test]
fn divergence_exits_with_3() {
    let w = Workspace::new();
    let o = run(&["train", "--config", "train.json", "--set", "train={\"epochs\":2,\"lr\":1e308,\"grad_clip\":null}"], w.path());
    assert_eq!(code(&o), 3, "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn translation_pipeline_end_to_end() {
    let tmp = tempdir().unwrap();
    let p = tmp.path();
    ok(run(&["synth", "bitext", "--seed", "1", "--n", "40", "--out", "train.jsonl", "--vocab-out", "vocab.json"], p));
    ok(run(&["synth", "bitext", "--seed", "2", "--n", "10", "--out", "test.jsonl", "--vocab-out", "vocab.json"], p));
    write(
        p,
        "nat.json",
        json!({
            "vocab": "vocab.json", "train_data": "train.jsonl", "test_data": "test.jsonl",
            "arch": {"dim": 16, "ffn_dim": 32, "enc_layers": 1, "dec_layers": 1},
            "train": {"epochs": 2, "seed": 1}, "iterations": 2
        }),
    );
    let trained = run_dir(&ok(run(&["nat-train", "--config", "nat.json"], p)), p);
    write(
        p,
        "natatk.json",
        json!({
            "vocab": "vocab.json", "model": trained.join("model.vlat"), "train_data": "train.jsonl", "test_data": "test.jsonl",
            "attack": {"top_k": 4}, "iterations": 2,
            "finetune": {"train": {"epochs": 1, "lr": 1e-4}, "replacement_baseline": true}
        }),
    );
    let out = ok(run(&["nat-attack", "--config", "natatk.json"], p));
    let dir = run_dir(&out, p);
    let text = String::from_utf8(out.stdout).unwrap();
    for row in ["baseline", "+vl-attack", "+replacement-only", "Drop%"] {
        assert!(text.contains(row), "{text}");
    }
    assert!(dir.join("model.vlat").is_file() && dir.join("model-replacement.vlat").is_file());
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap();
    for r in m["metrics"]["rows"].as_array().unwrap() {
        let b = &r["report"];
        assert!(b["clean_bleu"].as_f64().unwrap() >= 0.0 && b["drop_pct"].is_number());
    }
}
