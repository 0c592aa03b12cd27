use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use girnet::cli::CheckpointMeta;
use girnet::model::checkpoint;
use girnet::{Girnet64, ParamStore64};
use tempfile::TempDir;

const SMALL: &str = r#"{
    "optim": {"epochs": 1, "seed": 3},
    "data": {"aux_count": 200, "train_count": 100, "test_count": 60}
}"#;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("run.json"), config).unwrap();
        Self { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, verb: &str, extra: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_girnet"))
            .arg(verb)
            .arg("--config")
            .arg(self.path("run.json"))
            .args(extra)
            .env_remove("GIRNET_SEED")
            .output()
            .unwrap()
    }

    fn ok(&self, verb: &str, extra: &[&str]) -> String {
        let out = self.run(verb, extra);
        assert!(out.status.success(), "{verb}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    }

    fn trained(config: &str) -> Self {
        let w = Self::new(config);
        w.ok("gen", &[]);
        w.ok("train", &[]);
        w
    }
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap()
}

fn metric(stdout: &str, name: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(name)?.trim().parse().ok())
        .unwrap_or_else(|| panic!("no {name} in {stdout}"))
}

#[test]
fn gen_writes_five_files_deterministically() {
    let a = Workspace::new(SMALL);
    let b = Workspace::new(SMALL);
    assert_eq!(a.ok("gen", &[]).lines().count(), 5);
    b.ok("gen", &[]);
    for name in ["aux_a.tsv", "aux_b.tsv", "train.tsv", "test.tsv", "test.routing"] {
        assert_eq!(read(&a.path(&format!("data/{name}"))), read(&b.path(&format!("data/{name}"))), "{name}");
    }
    let c = Workspace::new(SMALL);
    c.ok("gen", &["--data.synthetic.seed", "4"]);
    assert_ne!(read(&a.path("data/train.tsv")), read(&c.path("data/train.tsv")));
}

#[test]
fn gen_rejects_empty_corpus_and_unwritable_dir() {
    let w = Workspace::new(SMALL);
    assert_eq!(w.run("gen", &["--data.test_count=0"]).status.code(), Some(1));
    let blocker = w.path("file");
    fs::write(&blocker, "").unwrap();
    let dir = format!("{}/sub", blocker.display());
    assert_eq!(w.run("gen", &["--data.dir", &dir]).status.code(), Some(2));
}

#[test]
fn seed_variable_overrides_config() {
    let w = Workspace::new(SMALL);
    let gen = |seed: &str, dir: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_girnet"))
            .args(["gen", "--config"])
            .arg(w.path("run.json"))
            .args(["--data.dir", dir])
            .env("GIRNET_SEED", seed)
            .output()
            .unwrap();
        assert!(out.status.success());
        read(&w.path(&format!("{dir}/train.tsv")))
    };
    assert_eq!(gen("11", "x"), gen("11", "y"));
    assert_ne!(gen("11", "x"), gen("12", "z"));
}

#[test]
fn usage_errors_exit_one() {
    let w = Workspace::new(SMALL);
    assert_eq!(w.run("train", &["--loss.alpha", "[1.0]"]).status.code(), Some(1));
    assert_eq!(w.run("train", &["--optim.batch_size", "0"]).status.code(), Some(1));
    assert_eq!(w.run("train", &["--model.unknown", "3"]).status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_girnet")).arg("eval").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    fs::write(w.path("run.json"), "{not json").unwrap();
    assert_eq!(w.run("gen", &[]).status.code(), Some(1));
}

#[test]
fn missing_files_exit_two() {
    let w = Workspace::new(SMALL);
    let out = Command::new(env!("CARGO_BIN_EXE_girnet"))
        .args(["gen", "--config"])
        .arg(w.path("absent.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    w.ok("gen", &[]);
    assert_eq!(w.run("eval", &[]).status.code(), Some(2));
}

#[test]
fn train_log_and_checkpoint() {
    let w = Workspace::trained(SMALL);
    let log = fs::read_to_string(w.path("runs/metrics.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    for (epoch, line) in lines.iter().enumerate() {
        assert_eq!(line["epoch"], epoch);
        assert!(line["dev"]["accuracy"].is_f64());
        assert!(line["agreement"].is_f64());
        assert_eq!(line["loss"]["aux"].as_array().unwrap().len(), 2);
    }
    let all = |i: usize| lines[i]["loss"]["all"].as_f64().unwrap();
    assert!(all(1) <= all(0), "{} > {}", all(1), all(0));

    let meta: CheckpointMeta = serde_json::from_str(&fs::read_to_string(w.path("runs/model.ckpt.meta.json")).unwrap()).unwrap();
    let store: ParamStore64 = checkpoint::load(&w.path("runs/model.ckpt")).unwrap();
    assert!(Girnet64::from_store(meta.model, store).is_ok());
}

#[test]
fn zero_epochs_saves_the_initialization() {
    let w = Workspace::trained(&SMALL.replace("\"epochs\": 1", "\"epochs\": 0"));
    let meta: CheckpointMeta = serde_json::from_str(&fs::read_to_string(w.path("runs/model.ckpt.meta.json")).unwrap()).unwrap();
    let store: ParamStore64 = checkpoint::load(&w.path("runs/model.ckpt")).unwrap();
    let init = Girnet64::new(meta.model, 3).unwrap();
    let init = girnet::model::SequenceModel::store(&init);
    assert_eq!(store.len(), init.len());
    for (name, p) in init.iter() {
        assert_eq!(store.value(name), Some(&p.value), "{name}");
    }

    let out = w.ok("eval", &[]);
    let acc = metric(&out, "accuracy");
    assert!((acc - 0.5).abs() < 0.1, "untrained accuracy {acc}");
    assert_eq!(out, w.ok("eval", &[]));
}

#[test]
fn eval_reports_metrics_and_agreement() {
    let w = Workspace::trained(SMALL);
    let out = w.ok("eval", &[]);
    for name in ["accuracy", "macro_precision", "macro_recall", "macro_f1", "agreement"] {
        let v = metric(&out, name);
        assert!((0.0..=1.0).contains(&v), "{name} {v}");
    }
    let other = w.ok("eval", &["--input", w.path("data/train.tsv").to_str().unwrap()]);
    assert!(!other.contains("agreement"));
}

#[test]
fn shape_mismatch_exits_four() {
    let w = Workspace::trained(SMALL);
    assert_eq!(w.run("eval", &["--model.d", "16"]).status.code(), Some(4));
    assert_eq!(w.run("trace", &["--model.num_aux", "1", "--loss.alpha", "[1.0]"]).status.code(), Some(4));
    fs::write(w.path("runs/model.ckpt"), b"garbage").unwrap();
    assert_eq!(w.run("eval", &[]).status.code(), Some(4));
}

#[test]
fn trace_csv_covers_every_token() {
    let w = Workspace::trained(SMALL);
    w.ok("trace", &[]);
    let mut reader = csv::Reader::from_path(w.path("runs/trace.csv")).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["seq", "pos", "token", "g1", "g2", "skip"]);
    let test = fs::read_to_string(w.path("data/test.tsv")).unwrap();
    let words: Vec<Vec<&str>> = test
        .lines()
        .map(|l| l.split('\t').next().unwrap().split(' ').collect())
        .collect();
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let seq: usize = rec[0].parse().unwrap();
        let pos: usize = rec[1].parse().unwrap();
        assert_eq!(&rec[2], words[seq][pos - 1]);
        let g: Vec<f64> = (3..6).map(|i| rec[i].parse().unwrap()).collect();
        assert!((g[2] - (1.0 - g[0] - g[1])).abs() < 1e-9);
        rows += 1;
    }
    assert_eq!(rows, words.iter().map(Vec::len).sum::<usize>());
}

#[test]
fn targeted_trace_has_left_and_right_rows() {
    let config = r#"{
        "model": {"num_aux": 1, "prim_head": "target-split", "aux_head": "classify-last", "bidirectional_gating": true},
        "optim": {"epochs": 1},
        "data": {"task": "targeted", "aux_count": 100, "train_count": 60, "test_count": 20}
    }"#;
    let w = Workspace::trained(config);
    assert!(!w.ok("eval", &[]).contains("agreement"));
    w.ok("trace", &[]);
    let test = fs::read_to_string(w.path("data/test.tsv")).unwrap();
    let expected: usize = test
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            let n = f[0].split(' ').count();
            let span: Vec<usize> = f[2].split(' ').map(|v| v.parse().unwrap()).collect();
            (span[0] - 1) + (n - span[1])
        })
        .sum();
    let mut reader = csv::Reader::from_path(w.path("runs/trace.csv")).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["seq", "pos", "token", "g1", "skip"]);
    let recs: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(recs.len(), expected);
    assert!(recs.iter().all(|r| r[0].ends_with("/left") || r[0].ends_with("/right")));
}

#[test]
fn gradcheck_passes_and_catches_a_fault() {
    let w = Workspace::new("{}");
    let out = w.ok("gradcheck", &[]);
    let err: f64 = out.split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!(err < 1e-4);
    // Three significant digits in scientific notation.
    assert!(out.split_whitespace().nth(3).unwrap().split('e').next().unwrap().len() >= 4);
    let bad = w.run("gradcheck", &["--fault", "sigmoid-grad"]);
    assert_eq!(bad.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("worst parameter"));
}

#[test]
fn train_is_reproducible() {
    let a = Workspace::trained(SMALL);
    let b = Workspace::trained(SMALL);
    for f in ["runs/model.ckpt", "runs/metrics.jsonl", "runs/model.ckpt.meta.json"] {
        assert_eq!(read(&a.path(f)), read(&b.path(f)), "{f}");
    }
}

#[test]
fn exploding_training_exits_three() {
    let w = Workspace::new(SMALL);
    w.ok("gen", &[]);
    let out = w.run("train", &["--optim.lr", "1e300", "--optim.clip", "null"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step"));
    assert!(!w.path("runs/model.ckpt").exists());
}
