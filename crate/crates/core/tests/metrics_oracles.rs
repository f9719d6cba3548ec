mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use npiprobe_core::forge::{Condition, ConditionKind, ProbeSentence, Variant};
use npiprobe_core::metrics::{cloze_score, perplexity, ppl_diff, score_dataset, MetricKind};
use npiprobe_core::mock::{CueRule, MockConfig};
use npiprobe_core::{Distribution, Error};

/// Rank by a full stable sort on (−p, id).
fn rank_by_sort(d: &Distribution, id: u32) -> usize {
    let mut order: Vec<u32> = (0..d.len() as u32).collect();
    order.sort_by(|&a, &b| d.prob(b).total_cmp(&d.prob(a)).then(a.cmp(&b)));
    order.iter().position(|&x| x == id).unwrap() + 1
}

fn sentence(id: u64, text: &str, kind: ConditionKind) -> ProbeSentence {
    let start = text.find(" any ").unwrap() + 1;
    ProbeSentence {
        id,
        pattern_id: id,
        condition: Condition::plain(kind),
        text: text.into(),
        any_start: start,
        any_end: start + 3,
        lic_start: 0,
        lic_end: text.find(' ').unwrap(),
        variant: Variant::WithAny,
    }
}

const WORDS: [&str; 9] = ["any", "few", "many", "girls", "crossed", "roads", "not", "didn't", "."];

#[test]
fn uniform_perplexity_is_vocab_size() {
    for extra in 0..40 {
        let mut words: Vec<String> = WORDS.iter().map(|w| w.to_string()).collect();
        words.extend((0..extra * 37).map(|i| format!("w{i}")));
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        let tok = common::wordpiece(&refs);
        let v = tok.vocab_size();
        let b = common::mock(tok, 1, 1, &MockConfig::default());
        for text in ["few girls crossed", "roads", "many roads crossed any girls ."] {
            assert_eq!(perplexity(&b, text).unwrap().ppl, v as f64, "|V| = {v}");
        }
    }
}

#[test]
fn two_token_bigram_perplexity() {
    let mut table: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    table.entry("[CLS]".into()).or_default().insert("few".into(), 7);
    table.entry("[CLS]".into()).or_default().insert("many".into(), 2);
    table.entry("few".into()).or_default().insert("girls".into(), 3);
    let b = common::mock(common::wordpiece(&WORDS), 1, 1, &MockConfig {
        bigram_table: table,
        ..Default::default()
    });
    // |V| = 13; p1 = 8/22, p2 = 4/16
    let (p1, p2) = (8.0f64 / 22.0, 4.0f64 / 16.0);
    let expected = (-(p1.ln() + p2.ln()) / 2.0).exp();
    let got = perplexity(&b, "few girls").unwrap();
    assert_eq!(got.scored_token_count, 2);
    assert!((got.ppl - expected).abs() < 1e-9);
    // single token: 1/p
    assert!((perplexity(&b, "many").unwrap().ppl - 22.0 / 3.0).abs() < 1e-9);
    assert!(matches!(perplexity(&b, ""), Err(Error::Argument(_))));
}

#[test]
fn ppl_diff_with_rare_any() {
    let mut table: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    let mut put = |a: &str, b: &str, c: u64| {
        table.entry(a.into()).or_default().insert(b.into(), c);
    };
    put("[CLS]", "few", 9);
    put("few", "girls", 9);
    put("girls", "crossed", 9);
    put("crossed", "roads", 86);
    put("crossed", "any", 0);
    put("any", "roads", 9);
    put("roads", ".", 9);
    let b = common::mock(common::wordpiece(&WORDS), 1, 1, &MockConfig {
        bigram_table: table,
        ..Default::default()
    });
    // |V| = 13. p(any | crossed) = 1/99 ≈ 0.01
    let p = |c: f64, total: f64| (c + 1.0) / (total + 13.0);
    let shared = [p(9.0, 9.0), p(9.0, 9.0), p(9.0, 9.0)];
    let with: Vec<f64> = shared.iter().copied().chain([p(0.0, 86.0), p(9.0, 9.0), p(9.0, 9.0)]).collect();
    let without: Vec<f64> = shared.iter().copied().chain([p(86.0, 86.0), p(9.0, 9.0)]).collect();
    let ppl = |ps: &[f64]| (-ps.iter().map(|x| x.ln()).sum::<f64>() / ps.len() as f64).exp();
    let d = ppl_diff(&b, &sentence(0, "Few girls crossed any roads.", ConditionKind::Few)).unwrap();
    assert!((d.with_any.ppl - ppl(&with)).abs() < 1e-9);
    assert!((d.without_any.ppl - ppl(&without)).abs() < 1e-9);
    assert_eq!(d.delta, d.with_any.ppl - d.without_any.ppl);
    assert!(d.delta > 0.0);
}

#[test]
fn cloze_rank_from_cue_fixture() {
    let b = common::mock(common::wordpiece(&WORDS), 1, 1, &MockConfig {
        cue_rules: vec![CueRule {
            cues: vec!["few".into()],
            prob: 0.3,
        }],
        default_prob: Some(0.01),
        ..Default::default()
    });
    let few = cloze_score(&b, &sentence(0, "Few girls crossed any roads.", ConditionKind::Few), "any").unwrap();
    assert_eq!((few.prob, few.rank), (0.3, 1));
    let many = cloze_score(&b, &sentence(1, "Many girls crossed any roads.", ConditionKind::Many), "any").unwrap();
    // 12 other ids share 0.99/12 = 0.0825 > 0.01
    assert_eq!((many.prob, many.rank), (0.01, 13));
}

#[test]
fn score_dataset_equals_independent_calls() {
    let b = common::mock(common::wordpiece(&WORDS), 1, 1, &MockConfig {
        cue_rules: vec![CueRule {
            cues: vec!["few".into(), "not".into()],
            prob: 0.4,
        }],
        default_prob: Some(0.02),
        ..Default::default()
    });
    let texts = [
        "Few girls crossed any roads.",
        "Many girls crossed any roads.",
        "girls crossed any roads.",
        "Few roads crossed any girls.",
        "Many roads crossed any girls.",
        "girls not crossed any roads.",
        "girls didn't crossed any roads.",
        "Few few crossed any roads.",
        "Many many crossed any roads.",
        "roads crossed any roads.",
    ];
    let data: Vec<ProbeSentence> = texts.iter().enumerate().map(|(i, t)| sentence(i as u64, t, ConditionKind::Few)).collect();
    for metric in [MetricKind::BertProb, MetricKind::BertRank] {
        let table = score_dataset(&b, &data, "h", metric).unwrap();
        assert_eq!(table.rows.len(), 10);
        for (row, s) in table.rows.iter().zip(&data) {
            let c = cloze_score(&b, s, "any").unwrap();
            let expected = if metric == MetricKind::BertProb { c.prob } else { c.rank as f64 };
            assert_eq!(row.value, expected);
            assert_eq!(row.id, s.id);
        }
    }
}

#[test]
fn failing_sentence_aborts_with_its_id() {
    let b = common::mock(common::wordpiece(&WORDS), 1, 1, &MockConfig::default());
    let mut bad = sentence(4, "Few girls crossed any roads.", ConditionKind::Few);
    bad.any_start = 0;
    bad.any_end = 0;
    let data = vec![sentence(3, "Few girls crossed any roads.", ConditionKind::Few), bad];
    match score_dataset(&b, &data, "h", MetricKind::BertProb) {
        Err(Error::Sentence { id, .. }) => assert_eq!(id, 4),
        other => panic!("{other:?}"),
    }
}

#[test]
fn metric_capability_is_checked() {
    let b = common::mock(common::wordpiece(&WORDS), 1, 1, &MockConfig::default()).with_capabilities(
        npiprobe_core::Capabilities {
            masked_prediction: false,
            causal_scoring: true,
            attention_export: true,
        },
    );
    let data = vec![sentence(0, "Few girls crossed any roads.", ConditionKind::Few)];
    assert!(matches!(score_dataset(&b, &data, "h", MetricKind::BertRank), Err(Error::Capability(_))));
}

fn distribution() -> impl Strategy<Value = Distribution> {
    // small integer weights make ties common
    prop::collection::vec(0u32..6, 2..60).prop_filter("non-zero mass", |w| w.iter().any(|&x| x > 0)).prop_map(|w| {
        let total: u32 = w.iter().sum();
        Distribution {
            probs: w.iter().map(|&x| x as f64 / total as f64).collect(),
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rank_and_probability_agree(d in distribution(), a in 0usize..60, b in 0usize..60) {
        let (a, b) = ((a % d.len()) as u32, (b % d.len()) as u32);
        prop_assert_eq!(d.rank(a), rank_by_sort(&d, a));
        let max = d.probs.iter().copied().fold(0.0, f64::max);
        let first_max = d.probs.iter().position(|&p| p == max).unwrap() as u32;
        prop_assert_eq!(d.rank(a) == 1, a == first_max);
        if d.prob(a) > d.prob(b) {
            prop_assert!(d.rank(a) < d.rank(b));
        }
    }
}

proptest! {
    #[test]
    fn perplexity_is_at_least_one(counts in prop::collection::vec(0u64..1000, 13 * 13), words in prop::collection::vec(4usize..13, 1..10)) {
        let tok = common::wordpiece(&WORDS);
        let mut table: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
        for (i, c) in counts.iter().enumerate() {
            let (a, b) = (tok.token((i / 13) as u32).unwrap().to_string(), tok.token((i % 13) as u32).unwrap().to_string());
            table.entry(a).or_default().insert(b, *c);
        }
        let text: Vec<&str> = words.iter().map(|&i| WORDS[i - 4]).collect();
        let text = text.join(" ");
        let n_tokens = tok.encode(&text, false).unwrap().len();
        let b = common::mock(tok, 1, 1, &MockConfig { bigram_table: table, ..Default::default() });
        let p = perplexity(&b, &text).unwrap();
        prop_assert!(p.ppl >= 1.0);
        prop_assert_eq!(p.scored_token_count, n_tokens);
    }
}
