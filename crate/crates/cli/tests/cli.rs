use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use maskgae::analysis::overlap_stats;
use maskgae::graph::load_graph;
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tiny").join(name)
}

fn maskgae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maskgae"))
        .args(args)
        .env_remove("MASKGAE_DATA_DIR")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

struct Tiny {
    _dir: tempfile::TempDir,
    root: PathBuf,
    edges: PathBuf,
    features: PathBuf,
    labels: PathBuf,
}

impl Tiny {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        Self {
            root: dir.path().to_path_buf(),
            _dir: dir,
            edges: fixture("tiny.edges"),
            features: fixture("tiny.features"),
            labels: fixture("tiny.labels"),
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn split(&self, name: &str, extra: &[&str]) -> PathBuf {
        let out = self.out(name);
        let mut args = vec!["split", "--edges", s(&self.edges), "--out", s(&out), "--val-frac", "0.1", "--test-frac", "0.2"];
        args.extend_from_slice(extra);
        ok(&maskgae(&args));
        out
    }

    fn pretrain(&self, split_dir: &Path, name: &str, extra: &[&str]) -> (PathBuf, Output) {
        let out = self.out(name);
        let split = split_dir.join("split_seed{seed}.json");
        let mut args = vec![
            "pretrain",
            "--edges", s(&self.edges),
            "--features", s(&self.features),
            "--split", s(&split),
            "--out", s(&out),
            "--set", "hidden_dim=16",
        ];
        args.extend_from_slice(extra);
        let res = maskgae(&args);
        (out, res)
    }
}

#[test]
fn split_is_reproducible_and_guarded() {
    let t = Tiny::new();
    let a = t.split("a", &[]);
    let b = t.split("b", &[]);
    let fa = fs::read(a.join("split_seed0.json")).unwrap();
    assert_eq!(fa, fs::read(b.join("split_seed0.json")).unwrap());
    let split = json(&a.join("split_seed0.json"));
    assert_eq!(split["val_pos"].as_array().unwrap().len(), 2);
    assert_eq!(split["test_pos"].as_array().unwrap().len(), 3);
    assert_eq!(split["train"].as_array().unwrap().len(), 12);
    let manifest = json(&a.join("manifest.json"));
    assert_eq!(manifest["command"], "split");
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["config"]["val_frac"], "0.1");

    // an existing run directory is not overwritten without --force
    let again = maskgae(&["split", "--edges", s(&t.edges), "--out", s(&a)]);
    assert_eq!(again.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    ok(&maskgae(&["split", "--edges", s(&t.edges), "--out", s(&a), "--force", "--seed", "0,1"]));
    assert!(a.join("split_seed1.json").exists());
}

#[test]
fn zero_fractions_keep_every_edge() {
    let t = Tiny::new();
    let out = t.out("all");
    ok(&maskgae(&["split", "--edges", s(&t.edges), "--out", s(&out), "--val-frac", "0", "--test-frac", "0"]));
    let split = json(&out.join("split_seed0.json"));
    assert_eq!(split["train"].as_array().unwrap().len(), 17);
    for key in ["val_pos", "val_neg", "test_pos", "test_neg"] {
        assert!(split[key].as_array().unwrap().is_empty(), "{key}");
    }
}

#[test]
fn pretrain_on_the_tiny_fixture() {
    let t = Tiny::new();
    let split = t.split("split", &[]);
    let start = Instant::now();
    let (out, res) = t.pretrain(&split, "pt", &["--epochs", "100", "--set", "patience=100"]);
    ok(&res);
    assert!(start.elapsed().as_secs_f64() < 5.0, "{:?}", start.elapsed());
    let state = json(&out.join("seed0/train_state.json"));
    let losses: Vec<f64> = state["history"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["loss"].as_f64().unwrap())
        .collect();
    let head = losses[..10].iter().sum::<f64>() / 10.0;
    let tail = losses[losses.len() - 10..].iter().sum::<f64>() / 10.0;
    assert!(tail < head, "{head} -> {tail}");
    let log = fs::read_to_string(out.join("seed0/train.log")).unwrap();
    assert_eq!(log.lines().count(), losses.len());
    assert!(log.starts_with("epoch=1 loss="));
    assert!(out.join("seed0/model.ckpt").exists());
}

fn masked_counts(log: &str) -> Vec<String> {
    log.lines()
        .map(|l| l.rsplit("masked=").next().unwrap().to_string())
        .collect()
}

#[test]
fn strategies_leave_different_mask_statistics() {
    let t = Tiny::new();
    let split = t.split("split", &[]);
    let (edge, r1) = t.pretrain(&split, "edge", &["--strategy", "edge", "--epochs", "20", "--set", "patience=20"]);
    let (path, r2) = t.pretrain(&split, "path", &["--strategy", "path", "--epochs", "20", "--set", "patience=20"]);
    ok(&r1);
    ok(&r2);
    let a = masked_counts(&fs::read_to_string(edge.join("seed0/train.log")).unwrap());
    let b = masked_counts(&fs::read_to_string(path.join("seed0/train.log")).unwrap());
    assert_ne!(a, b);
    assert_eq!(json(&edge.join("manifest.json"))["config"]["strategy"], "edge");
    assert_eq!(json(&path.join("manifest.json"))["config"]["strategy"], "path");
}

#[test]
fn missing_split_is_a_usage_error() {
    let t = Tiny::new();
    let (_, res) = t.pretrain(&t.out("nowhere"), "pt", &[]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("nowhere/split_seed0.json"), "{err}");
}

#[test]
fn unknown_keys_and_bad_values_are_usage_errors() {
    let t = Tiny::new();
    let cfg = t.out("bad.cfg");
    fs::write(&cfg, "colour = blue\n").unwrap();
    let res = maskgae(&["split", "--config", s(&cfg), "--edges", s(&t.edges), "--out", s(&t.out("x"))]);
    assert_eq!(res.status.code(), Some(2));
    let res = maskgae(&["split", "--edges", s(&t.edges), "--out", s(&t.out("y")), "--val-frac", "1.5"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn seeds_run_in_parallel_with_identical_outputs() {
    let t = Tiny::new();
    let split = t.split("split", &["--seed", "0,1,2"]);
    let common = ["--seed", "0,1,2", "--epochs", "15", "--set", "patience=15"];
    let (seq, r1) = t.pretrain(&split, "seq", &common);
    let mut par_args = common.to_vec();
    par_args.extend_from_slice(&["--jobs", "3"]);
    let (par, r2) = t.pretrain(&split, "par", &par_args);
    ok(&r1);
    ok(&r2);
    for seed in 0..3 {
        for file in ["model.ckpt", "train.log", "train_state.json"] {
            let rel = format!("seed{seed}/{file}");
            assert_eq!(fs::read(seq.join(&rel)).unwrap(), fs::read(par.join(&rel)).unwrap(), "{rel}");
        }
    }
}

#[test]
fn untrained_link_prediction_is_near_chance() {
    // structureless random graph: an untrained model has nothing to exploit
    let t = Tiny::new();
    let n = 300;
    let mut edges = String::new();
    let mut state = 12345u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 33) as f64 / (1u64 << 31) as f64
    };
    for u in 0..n {
        for v in u + 1..n {
            if next() < 0.02 {
                edges.push_str(&format!("{u} {v}\n"));
            }
        }
    }
    let mut feats = format!("{n} 8\n");
    for _ in 0..n {
        let row: Vec<String> = (0..8).map(|_| format!("{:.4}", next() * 2.0 - 1.0)).collect();
        feats.push_str(&(row.join(" ") + "\n"));
    }
    let (ep, fp) = (t.out("er.edges"), t.out("er.features"));
    fs::write(&ep, edges).unwrap();
    fs::write(&fp, feats).unwrap();
    let seeds = "0,1,2,3,4";
    let split = t.out("split");
    ok(&maskgae(&["split", "--edges", s(&ep), "--out", s(&split), "--seed", seeds, "--test-frac", "0.3"]));
    let pt = t.out("pt");
    let split_tpl = split.join("split_seed{seed}.json");
    ok(&maskgae(&[
        "pretrain", "--edges", s(&ep), "--features", s(&fp), "--split", s(&split_tpl),
        "--out", s(&pt), "--seed", seeds, "--epochs", "0",
    ]));
    let lp = t.out("lp");
    let ckpt = pt.join("seed{seed}/model.ckpt");
    ok(&maskgae(&[
        "eval-linkpred", "--edges", s(&ep), "--features", s(&fp), "--split", s(&split_tpl),
        "--checkpoint", s(&ckpt), "--out", s(&lp), "--seed", seeds,
    ]));
    let summary = json(&lp.join("summary.json"));
    assert_eq!(summary["n_runs"], 5);
    let auc = summary["mean"]["auc"].as_f64().unwrap();
    assert!((auc - 0.5).abs() < 0.07, "{auc}");
    let one = json(&lp.join("seed3/metrics.json"));
    assert_eq!(one["task"], "linkpred");
    assert_eq!(one["seed"], 3);
    assert!(one["config_digest"].as_str().unwrap().len() == 64);
}

#[test]
fn node_classification_needs_labels() {
    let t = Tiny::new();
    let split = t.split("split", &[]);
    let (pt, res) = t.pretrain(&split, "pt", &["--epochs", "5", "--set", "patience=5"]);
    ok(&res);
    let ckpt = pt.join("seed{seed}/model.ckpt");
    let res = maskgae(&[
        "eval-nodeclf", "--edges", s(&t.edges), "--features", s(&t.features),
        "--checkpoint", s(&ckpt), "--out", s(&t.out("nc0")),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("labels"));

    let out = t.out("nc");
    let node_split = fixture("tiny.split.json");
    ok(&maskgae(&[
        "eval-nodeclf", "--edges", s(&t.edges), "--features", s(&t.features), "--labels", s(&t.labels),
        "--node-split", s(&node_split), "--checkpoint", s(&ckpt), "--out", s(&out),
        "--set", "probe_epochs=50",
    ]));
    let m = json(&out.join("seed0/metrics.json"));
    assert_eq!(m["task"], "nodeclf");
    let acc = m["metrics"]["test_acc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
}

#[test]
fn overlap_matches_the_library() {
    let t = Tiny::new();
    let out = t.out("ov");
    ok(&maskgae(&["overlap-stats", "--edges", s(&t.edges), "--regime", "none", "--k", "2", "--out", s(&out)]));
    let csv = fs::read_to_string(out.join("overlap.csv")).unwrap();
    let g = load_graph(&t.edges, None, None).unwrap();
    let r = overlap_stats(&g, g.edges(), 2).unwrap();
    let expected = format!(
        "regime,k,o_node,o_edge,n_seeds\nnone,2,{:.6},{:.6},1\n",
        r.o_node, r.o_edge
    );
    assert_eq!(csv, expected);

    let all = t.out("ov_all");
    ok(&maskgae(&[
        "overlap-stats", "--edges", s(&t.edges), "--regime", "all", "--k", "1,2",
        "--set", "overlap_seeds=3", "--out", s(&all),
    ]));
    let csv = fs::read_to_string(all.join("overlap.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    assert!(csv.contains("\npath,2,") && csv.contains("\nedge,1,"));
}

#[test]
fn dataset_names_resolve_under_the_data_dir() {
    let t = Tiny::new();
    let base = t.out("data");
    fs::create_dir_all(base.join("tiny")).unwrap();
    for ext in ["edges", "features", "labels"] {
        fs::copy(fixture(&format!("tiny.{ext}")), base.join(format!("tiny/tiny.{ext}"))).unwrap();
    }
    let out = t.out("s");
    let res = Command::new(env!("CARGO_BIN_EXE_maskgae"))
        .args(["split", "--dataset", "tiny", "--out", s(&out)])
        .env("MASKGAE_DATA_DIR", &base)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    ok(&res);
    let manifest = json(&out.join("manifest.json"));
    assert!(manifest["config"]["edges"].as_str().unwrap().ends_with("tiny/tiny.edges"));

    let missing = Command::new(env!("CARGO_BIN_EXE_maskgae"))
        .args(["split", "--dataset", "cora", "--out", s(&t.out("m"))])
        .env("MASKGAE_DATA_DIR", &base)
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("cora/cora.edges"));
}
