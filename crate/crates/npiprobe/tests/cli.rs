mod common;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn npiprobe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_npiprobe"))
        .args(args)
        .env_remove("NPIPROBE_ADMIN_TOKEN")
        .output()
        .unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = npiprobe(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn count_only_gives_the_full_pattern_count() {
    let lex = common::data("lexicon.json");
    let v = ok_json(&["forge", "generate", "--lexicon", p(&lex), "--count-only"]);
    assert_eq!(v["patterns"], 990_000);
    let v = ok_json(&["forge", "generate", "--lexicon", p(&lex), "--nouns", "4", "--verbs", "3", "--count-only"]);
    assert_eq!(v["patterns"], 36);
}

#[test]
fn binomial_from_the_command_line() {
    let v = ok_json(&["stats", "binom", "--k", "9", "--n", "10"]);
    assert!((v["p_value"].as_f64().unwrap() - 22.0 / 1024.0).abs() < 1e-12);
    assert_eq!(v["alternative"], "two-sided");
    let v = ok_json(&["stats", "binom", "--k", "9", "--n", "10", "--alternative", "greater"]);
    assert!((v["p_value"].as_f64().unwrap() - 11.0 / 1024.0).abs() < 1e-12);
}

#[test]
fn realize_score_compare_by_hand() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let lex = common::data("lexicon.json");
    let mock = common::data("mock-planted.json");
    let core = d.join("core.json");
    let out = npiprobe(&[
        "forge", "select-core", "--lexicon", p(&lex), "--backend", p(&mock), "--k", "20", "--nouns", "4", "--verbs", "3",
        "--out", p(&core),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for cond in ["neg", "aff"] {
        let data = d.join(format!("{cond}.jsonl"));
        let out = npiprobe(&["forge", "realize", "--lexicon", p(&lex), "--core", p(&core), "--condition", cond, "--out", p(&data)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let scores = d.join(format!("{cond}.scores.jsonl"));
        let out = npiprobe(&[
            "metrics", "score", "--backend", p(&mock), "--dataset", p(&data), "--metric", "bert-prob", "--out", p(&scores),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let v = ok_json(&["compare", "--a", p(&d.join("neg.scores.jsonl")), "--b", p(&d.join("aff.scores.jsonl"))]);
    assert_eq!(v["pct_a_better"], 100.0);
    assert_eq!(v["n_pairs"], 20);
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = json!({
        "version": 1,
        "seed": 2,
        "lexicon": "lexicon.json",
        "out_dir": out,
        "backends": { "masked": "mock-planted.json" },
        "forge": { "nouns": 4, "verbs": 3, "core_size": 100, "conditions": ["neg", "aff"] },
        "metrics": ["bert-prob"],
        "compare": { "pairs": [["neg", "aff"]] }
    });
    let path = common::write_config(dir.path(), cfg);
    let run = npiprobe(&["run", "--config", p(&path)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let manifest = out.join("manifest.json");
    assert!(manifest.exists());
    let rep = npiprobe(&["report", "--manifest", p(&manifest)]);
    assert!(rep.status.success(), "{}", String::from_utf8_lossy(&rep.stderr));
    assert!(out.join("report/dominance-bert-prob.svg").exists());

    let seeded = npiprobe(&["--seed", "5", "run", "--config", p(&path)]);
    assert!(seeded.status.success());
    let m: Value = serde_json::from_slice(&std::fs::read(&manifest).unwrap()).unwrap();
    assert_eq!(m["seed"], 5);
}

#[test]
fn errors_exit_nonzero_with_a_code() {
    let out = npiprobe(&["compare", "--a", "/no/such/a.jsonl", "--b", "/no/such/b.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[io]:"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let lex = common::data("lexicon.json");
    let out = npiprobe(&[
        "forge", "realize", "--lexicon", p(&lex), "--core", p(&lex), "--condition", "sometimes",
        "--out", p(&dir.path().join("x.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn mine_writes_both_sides() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("natural");
    let v = ok_json(&[
        "forge", "mine", "--kind", "neg", "--corpus", p(&common::data("corpus.txt")), "--lexicon",
        p(&common::data("lexicon.json")), "--out-prefix", p(&prefix),
    ]);
    let n = v["pairs"].as_array().unwrap().len();
    assert_eq!(n, 48);
    for side in ["negative", "positive"] {
        let text = std::fs::read_to_string(dir.path().join(format!("natural-{side}.jsonl"))).unwrap();
        assert_eq!(text.lines().count(), 2 * n, "{side}");
    }
}
