mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use npiprobe_core::mock::{AttentionFixture, MockConfig};
use npiprobe_core::{Backend, Error, Span, TokenSequence};

const WORDS: [&str; 6] = ["any", "not", "few", "girls", "roads", "x"];

fn table(entries: &[(&str, &str, u64)]) -> BTreeMap<String, BTreeMap<String, u64>> {
    let mut t: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for (a, b, c) in entries {
        t.entry(a.to_string()).or_default().insert(b.to_string(), *c);
    }
    t
}

fn seq(ids: Vec<u32>) -> TokenSequence {
    let spans = vec![Span::default(); ids.len()];
    TokenSequence { ids, spans }
}

#[test]
fn bigram_row_is_the_table_row() {
    let config = MockConfig {
        bigram_table: table(&[("x", "any", 5), ("x", "roads", 2)]),
        ..Default::default()
    };
    let b = common::mock(common::wordpiece(&WORDS), 1, 1, &config);
    let x = b.tokenizer().token_id("x").unwrap();
    let d = b.clm_logits(&seq(vec![x])).unwrap();
    assert_eq!(d.len(), 1);
    // |V| = 10, row total 7
    for id in 0..10u32 {
        let tok = b.tokenizer().token(id).unwrap();
        let c = match tok {
            "any" => 5,
            "roads" => 2,
            _ => 0,
        };
        assert_eq!(d[0].prob(id), (c + 1) as f64 / 17.0, "{tok}");
    }
}

#[test]
fn uniform_backend_rows_are_uniform() {
    let b = common::mock(common::wordpiece(&WORDS), 1, 1, &MockConfig::default());
    for d in b.clm_logits(&seq(vec![4, 5, 6])).unwrap() {
        assert!(d.probs.iter().all(|&p| p == 0.1));
    }
}

#[test]
fn declared_attention_is_returned_verbatim() {
    let mut fixture = AttentionFixture::new();
    let head = |hot: usize| -> Vec<Vec<f64>> {
        (0..3)
            .map(|_| (0..3).map(|k| if k == hot { 0.5 } else { 0.25 }).collect())
            .collect()
    };
    fixture.insert("3".into(), vec![vec![head(0), head(1)], vec![head(2), head(0)]]);
    let config = MockConfig {
        attention_fixture: fixture,
        ..Default::default()
    };
    let b = common::mock(common::wordpiece(&WORDS), 2, 2, &config);
    let t = b.attention_map(&seq(vec![0, 4, 1])).unwrap();
    assert_eq!((t.layers, t.heads, t.len), (2, 2, 3));
    assert_eq!(t.get(0, 1, 2, 1), 0.5);
    assert_eq!(t.get(1, 0, 0, 2), 0.5);
    assert_eq!(t.get(1, 1, 1, 1), 0.25);
    // undeclared lengths fall back to uniform rows
    let u = b.attention_map(&seq(vec![0, 4, 5, 1])).unwrap();
    assert!(u.weights.iter().all(|&w| w == 0.25));
    assert!(u.rows_normalized());
}

#[test]
fn capabilities_are_enforced() {
    let caps = npiprobe_core::Capabilities {
        masked_prediction: true,
        causal_scoring: false,
        attention_export: false,
    };
    let b = common::mock(common::wordpiece(&WORDS), 1, 1, &MockConfig::default()).with_capabilities(caps);
    assert!(matches!(b.clm_logits(&seq(vec![4])), Err(Error::Capability(_))));
    assert!(matches!(b.attention_map(&seq(vec![4])), Err(Error::Capability(_))));
    assert!(matches!(b.clm_logits(&seq(vec![])), Err(Error::Capability(_))));
}

proptest! {
    #[test]
    fn causal_positions_ignore_the_future(
        counts in prop::collection::vec(0u64..20, 36),
        ids in prop::collection::vec(4u32..10, 2..8),
        cut in 0usize..7,
        replacement in prop::collection::vec(4u32..10, 8),
    ) {
        let mut t = BTreeMap::<String, BTreeMap<String, u64>>::new();
        for (k, c) in counts.iter().enumerate() {
            t.entry(WORDS[k / 6].to_string()).or_default().insert(WORDS[k % 6].to_string(), *c);
        }
        let config = MockConfig { bigram_table: t, ..Default::default() };
        let b = common::mock(common::wordpiece(&WORDS), 1, 1, &config);
        let cut = cut % ids.len();
        let original = b.clm_logits(&seq(ids.clone())).unwrap();
        let mut mutated = ids.clone();
        for (i, id) in mutated.iter_mut().enumerate().skip(cut + 1) {
            *id = replacement[i];
        }
        let after = b.clm_logits(&seq(mutated)).unwrap();
        for i in 0..=cut {
            prop_assert_eq!(&original[i].probs, &after[i].probs);
        }
        for d in &original {
            prop_assert!(d.is_normalized());
        }
        // identical input, identical bytes
        let again = b.clm_logits(&seq(ids)).unwrap();
        prop_assert_eq!(original, again);
    }
}
