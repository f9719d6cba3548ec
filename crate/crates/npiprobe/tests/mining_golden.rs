mod common;

use serde::Deserialize;

use npiprobe::files::read_text;
use npiprobe_core::forge::{mine_negation_pairs, mine_nobody_pairs, MiningReport};

#[derive(Deserialize)]
struct GoldPair {
    line: usize,
    negative: String,
    positive: String,
}

#[derive(Deserialize)]
struct Gold {
    negation: Vec<GoldPair>,
    nobody: Vec<GoldPair>,
    negation_dropped: usize,
}

fn gold() -> Gold {
    serde_json::from_str(&read_text(&common::data("corpus.gold.json")).unwrap()).unwrap()
}

fn triples(r: &MiningReport) -> Vec<(usize, String, String)> {
    r.pairs
        .iter()
        .map(|p| (p.line, p.negative_text.clone(), p.positive_text.clone()))
        .collect()
}

fn expected(pairs: &[GoldPair]) -> Vec<(usize, String, String)> {
    pairs.iter().map(|p| (p.line, p.negative.clone(), p.positive.clone())).collect()
}

#[test]
fn negation_pairs_match_the_annotation() {
    let corpus = read_text(&common::data("corpus.txt")).unwrap();
    let report = mine_negation_pairs(&corpus, Some(&common::lexicon()));
    let gold = gold();
    assert_eq!(report.lines, 200);
    assert_eq!(triples(&report), expected(&gold.negation));
    assert_eq!(report.dropped, gold.negation_dropped);
}

#[test]
fn nobody_pairs_match_the_annotation() {
    let corpus = read_text(&common::data("corpus.txt")).unwrap();
    let report = mine_nobody_pairs(&corpus);
    assert_eq!(triples(&report), expected(&gold().nobody));
}

#[test]
fn spans_point_at_the_words() {
    let corpus = read_text(&common::data("corpus.txt")).unwrap();
    let report = mine_negation_pairs(&corpus, Some(&common::lexicon()));
    for p in &report.pairs {
        let any = &p.negative_text[p.negative_any.start..p.negative_any.end];
        assert_eq!(any.to_lowercase(), "any", "{}", p.negative_text);
        assert_eq!(&p.positive_text[p.positive_any.start..p.positive_any.end], any);
        let lic = &p.negative_text[p.negative_licensor.start..p.negative_licensor.end];
        assert!(lic.to_lowercase().contains("not") || lic.contains("n't"), "{lic}");
        assert!(p.negative_licensor.end <= p.negative_any.start);
    }
}
