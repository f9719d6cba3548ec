mod common;

use npiprobe::files::{
    lineage_hash, meta_path, read_dataset, read_jsonl, read_scores, sha256_file, write_dataset, write_scores,
};
use npiprobe::scoring;
use npiprobe_core::forge::{generate_base_patterns, realize_condition, Condition, ConditionKind, ProbeSentence};
use npiprobe_core::metrics::{self, MetricKind};

fn sentences(kind: ConditionKind) -> Vec<ProbeSentence> {
    let lex = common::lexicon().capped(4, 3);
    let patterns = generate_base_patterns(&lex).unwrap();
    patterns
        .iter()
        .flat_map(|p| {
            let s = realize_condition(&lex, p, &Condition::plain(kind)).unwrap();
            let w = s.without_any().unwrap();
            [s, w]
        })
        .collect()
}

#[test]
fn dataset_round_trips_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("neg.jsonl");
    let data = sentences(ConditionKind::Neg);
    let lex = common::lexicon();
    let lineage = lineage_hash(&lex, "gen-1", "p");
    let meta = write_dataset(&path, &data, &lineage, "gen-1").unwrap();
    assert_eq!(meta.sentences, data.len());
    assert_eq!(meta.content_sha256, sha256_file(&path).unwrap());
    assert!(meta_path(&path).exists());
    let (back, got_lineage) = read_dataset(&path).unwrap();
    assert_eq!(back, data);
    assert_eq!(got_lineage, lineage);
}

#[test]
fn dataset_without_sidecar_uses_its_own_hash() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("aff.jsonl");
    write_dataset(&path, &sentences(ConditionKind::Aff), "x", "gen").unwrap();
    std::fs::remove_file(meta_path(&path)).unwrap();
    let (_, lineage) = read_dataset(&path).unwrap();
    assert_eq!(lineage, sha256_file(&path).unwrap());
}

#[test]
fn lineage_depends_on_every_input() {
    let lex = common::lexicon();
    let base = lineage_hash(&lex, "g1", "p");
    assert_eq!(base, lineage_hash(&lex, "g1", "p"));
    assert_ne!(base, lineage_hash(&lex, "g2", "p"));
    assert_ne!(base, lineage_hash(&lex, "g1", "q"));
    assert_ne!(base, lineage_hash(&lex.capped(5, 5), "g1", "p"));
}

#[test]
fn malformed_jsonl_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    std::fs::write(&path, "{\"a\":1}\n\n{\"a\":2}\n{oops\n").unwrap();
    let err = read_jsonl::<serde_json::Value>(&path).unwrap_err();
    assert_eq!(err.code(), "format");
    assert!(err.to_string().contains("bad.jsonl:4:"), "{err}");
}

#[test]
fn scores_round_trip_at_nine_digits() {
    let backend = common::mock();
    let data = sentences(ConditionKind::Few);
    for metric in [MetricKind::BertProb, MetricKind::BertRank, MetricKind::GptPplDiff] {
        let table = scoring::score_dataset(backend.as_ref(), &data, "h", metric).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        write_scores(&path, &table).unwrap();
        let back = read_scores(&path).unwrap();
        assert_eq!(back.header, table.header);
        assert_eq!(back.rows.len(), table.rows.len());
        for (a, b) in back.rows.iter().zip(&table.rows) {
            assert_eq!((a.id, a.pattern_id, a.condition), (b.id, b.pattern_id, b.condition));
            let tol = b.value.abs() * 1e-8;
            assert!((a.value - b.value).abs() <= tol, "{} vs {}", a.value, b.value);
        }
        // a second write of the read-back table is byte-identical
        let again = dir.path().join("u.jsonl");
        write_scores(&again, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }
}

#[test]
fn parallel_scoring_equals_serial() {
    let backend = common::mock();
    let mut data = sentences(ConditionKind::Neg);
    data.extend(sentences(ConditionKind::Aff).into_iter().map(|mut s| {
        s.id += 1_000_000;
        s
    }));
    for metric in [MetricKind::BertProb, MetricKind::BertRank, MetricKind::GptPplDiff] {
        let par = scoring::score_dataset(backend.as_ref(), &data, "h", metric).unwrap();
        let ser = metrics::score_dataset(backend.as_ref(), &data, "h", metric).unwrap();
        assert_eq!(par, ser, "{metric:?}");
    }
}

#[test]
fn bundled_lexicon_is_valid() {
    let lex = common::lexicon();
    assert_eq!(lex.nouns.len(), 100);
    assert_eq!(lex.verbs.len(), 100);
}
