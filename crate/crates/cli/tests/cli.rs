use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coherent_cli::provenance::dir_hash;
use tempfile::TempDir;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn airport() -> String {
    fixtures().join("airport.jsonl").to_string_lossy().into_owned()
}

fn coherent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coherent"))
        .args(args)
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str]) -> Output {
    let o = coherent(args);
    assert!(o.status.success(), "coherent {args:?} failed:\n{}", stderr(&o));
    o
}

struct Work(TempDir);

impl Work {
    fn new() -> Self {
        Work(tempfile::tempdir().unwrap())
    }

    fn path(&self, name: &str) -> String {
        self.0.path().join(name).to_string_lossy().into_owned()
    }

    /// Small synthetic corpus (60 docs) for the training commands.
    fn corpus(&self) -> String {
        let out = self.path("corpus.jsonl");
        ok(&["synth", "--out", &out, "--n-docs", "60", "--seed", "1"]);
        out
    }
}

#[test]
fn build_graph_on_airport() {
    let w = Work::new();
    let out = w.path("graphs.jsonl");
    let o = ok(&["build-graph", "--corpus", &airport(), "--out", &out]);
    assert!(stdout(&o).contains("entity edges: 3  relation edges: 3"), "{}", stdout(&o));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("{\"provenance\":"));
    let graph: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
    assert_eq!(graph["doc_id"], "airport");
}

#[test]
fn empty_corpus_warns_and_succeeds() {
    let w = Work::new();
    let corpus = w.path("empty.jsonl");
    fs::write(&corpus, "").unwrap();
    let o = ok(&["build-graph", "--corpus", &corpus, "--out", &w.path("g.jsonl")]);
    assert!(stderr(&o).contains("corpus is empty"), "{}", stderr(&o));
}

#[test]
fn corrupt_line_is_reported_by_number() {
    let w = Work::new();
    let good = fs::read_to_string(airport()).unwrap();
    let line = good.trim_end();
    let mut text = String::new();
    for k in 0..6 {
        text.push_str(&line.replace("\"airport\"", &format!("\"d{k}\"")));
        text.push('\n');
    }
    text.push_str("{\"id\": \"broken\", \"sentences\": [\n");
    let corpus = w.path("bad.jsonl");
    fs::write(&corpus, text).unwrap();
    let o = coherent(&["build-graph", "--corpus", &corpus, "--out", &w.path("g.jsonl")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 7"), "{}", stderr(&o));
}

#[test]
fn emitted_prompts_match_golden_files_and_are_stable() {
    let w = Work::new();
    let variants = "TextOnly,TextEnty,TextRel,Full,FullWithExplanation";
    let emit = |dir: &str| ok(&["emit-prompts", "--corpus", &airport(), "--out-dir", dir, "--variants", variants]);
    emit(&w.path("a"));
    for name in ["TextOnly", "TextEnty", "TextRel", "Full", "FullWithExplanation"] {
        let file = format!("airport.{name}.txt");
        let got = fs::read(Path::new(&w.path("a")).join(&file)).unwrap();
        let want = fs::read(fixtures().join("golden").join(&file)).unwrap();
        assert!(got == want, "{file} differs from golden");
    }
    let text_only = fs::read_to_string(Path::new(&w.path("a")).join("airport.TextOnly.txt")).unwrap();
    assert!(!text_only.contains("(s1,"));
    let index = fs::read_to_string(Path::new(&w.path("a")).join("index.tsv")).unwrap();
    assert!(index.starts_with("# provenance {"));
    assert_eq!(index.lines().filter(|l| l.starts_with("airport\t")).count(), 5);

    emit(&w.path("b"));
    emit(&w.path("a"));
    let a = dir_hash(Path::new(&w.path("a"))).unwrap();
    assert_eq!(a, dir_hash(Path::new(&w.path("b"))).unwrap());
}

#[test]
fn training_is_reproducible_and_eval_checks_config() {
    let w = Work::new();
    let corpus = w.corpus();
    let train = |out: &str| {
        ok(&["train", "--corpus", &corpus, "--out", out, "--toy", "--epochs", "2", "--seed", "5"]);
    };
    train(&w.path("a.ckpt"));
    train(&w.path("b.ckpt"));
    assert_eq!(fs::read(w.path("a.ckpt")).unwrap(), fs::read(w.path("b.ckpt")).unwrap());
    let metrics = fs::read_to_string(w.path("a.ckpt.metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 3, "provenance header plus one line per epoch");

    let report = w.path("report.json");
    ok(&["eval", "--corpus", &corpus, "--checkpoint", &w.path("a.ckpt"), "--out", &report]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["report"]["n"], 60);
    assert_eq!(v["checkpoint_provenance"]["command"], "train");

    let o = coherent(&["eval", "--corpus", &corpus, "--checkpoint", &w.path("a.ckpt"), "--d-model", "64"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("does not match") && err.contains("d_model: 32 vs 64"), "{err}");
}

#[test]
fn cv_writes_one_result_per_fold() {
    let w = Work::new();
    let corpus = w.corpus();
    let out = w.path("cv");
    ok(&["cv", "--corpus", &corpus, "--out-dir", &out, "--toy", "--epochs", "1", "--variants", "Full,TextOnly"]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(Path::new(&out).join("cv.json")).unwrap()).unwrap();
    let reports = v["reports"].as_array().expect("reports array");
    assert_eq!(reports.len(), 2);
    for r in reports {
        assert_eq!(r["k"], 5);
        assert_eq!(r["folds"].as_array().unwrap().len(), 5);
    }
    let md = fs::read_to_string(Path::new(&out).join("cv.md")).unwrap();
    assert!(md.contains("Full") && md.contains("TextOnly"));
}

#[test]
fn xdomain_rejects_unknown_tags() {
    let w = Work::new();
    let corpus = w.corpus();
    let o = coherent(&["xdomain", "--corpus", &corpus, "--out-dir", &w.path("x"), "--train-tag", "nowhere", "--toy"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown domain tag"), "{}", stderr(&o));
}

#[test]
fn help_lists_defaults() {
    let o = ok(&["train", "--help"]);
    let help = stdout(&o);
    for needle in ["--lr", "[default: 0.001]", "--d-model", "[default: 256]", "--toy"] {
        assert!(help.contains(needle), "missing {needle:?} in\n{help}");
    }
}

#[test]
fn bad_invocations_exit_with_one() {
    assert_eq!(coherent(&["train", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(coherent(&[]).status.code(), Some(1));
    let w = Work::new();
    let corpus = w.corpus();
    let o = coherent(&["train", "--corpus", &corpus, "--out", &w.path("m"), "--d-model", "30", "--heads", "4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("divisible"), "{}", stderr(&o));
}

#[test]
fn divergence_exits_with_two() {
    let w = Work::new();
    let corpus = w.corpus();
    let o = coherent(&["train", "--corpus", &corpus, "--out", &w.path("m"), "--toy", "--lr", "1e6", "--epochs", "3"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!Path::new(&w.path("m")).exists());
}

#[test]
fn config_file_overrides_and_rejects_unknown_keys() {
    let w = Work::new();
    let corpus = w.corpus();
    let cfg = w.path("cfg.json");
    fs::write(&cfg, r#"{"model": {"d_model": 16, "n_heads": 2, "n_layers": 1, "d_ffn": 32}, "train": {"epochs": 1}}"#).unwrap();
    ok(&["train", "--corpus", &corpus, "--out", &w.path("m.ckpt"), "--config", &cfg]);
    let ckpt: serde_json::Value = serde_json::from_str(&fs::read_to_string(w.path("m.ckpt")).unwrap()).unwrap();
    assert_eq!(ckpt["config"]["d_model"], 16);
    let metrics = fs::read_to_string(w.path("m.ckpt.metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 2);

    fs::write(&cfg, r#"{"model": {"d_modle": 16}}"#).unwrap();
    let o = coherent(&["train", "--corpus", &corpus, "--out", &w.path("n.ckpt"), "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown key \"d_modle\""), "{}", stderr(&o));
}
