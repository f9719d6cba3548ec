use std::path::{Path, PathBuf};

use serde::Deserialize;

use npiprobe::loader::{load_backend, read_manifest, read_safetensors};
use npiprobe_core::{Backend, TokenSequence};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[derive(Deserialize)]
struct BertCase {
    text: String,
    ids: Vec<u32>,
    mask_index: usize,
    probs: Vec<f64>,
    attention: Vec<Vec<Vec<Vec<f64>>>>,
}

#[derive(Deserialize)]
struct GptCase {
    text: String,
    ids: Vec<u32>,
    log_probs: Vec<f64>,
    attention: Vec<Vec<Vec<Vec<f64>>>>,
}

fn expected<T: for<'de> Deserialize<'de>>(dir: &str) -> Vec<T> {
    let text = std::fs::read_to_string(fixture(dir).join("expected.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn check_attention(backend: &dyn Backend, seq: &TokenSequence, want: &[Vec<Vec<Vec<f64>>>]) {
    let att = backend.attention_map(seq).unwrap();
    assert!(att.rows_normalized());
    for (l, layer) in want.iter().enumerate() {
        for (h, head) in layer.iter().enumerate() {
            for (q, row) in head.iter().enumerate() {
                for (k, &w) in row.iter().enumerate() {
                    let got = att.get(l, h, q, k);
                    assert!((got - w).abs() < 1e-5, "attention {l},{h},{q},{k}: {got} vs {w}");
                }
            }
        }
    }
}

#[test]
fn bert_matches_reference_forward_pass() {
    let backend = load_backend(&fixture("tiny-bert/manifest.json")).unwrap();
    assert!(backend.info().capabilities.masked_prediction);
    for case in expected::<BertCase>("tiny-bert") {
        let seq = backend.tokenizer().encode(&case.text, true).unwrap();
        assert_eq!(seq.ids, case.ids, "{}", case.text);
        let dist = backend.mlm_predict(&seq, case.mask_index).unwrap();
        assert!(dist.is_normalized());
        for (id, &p) in case.probs.iter().enumerate() {
            let got = dist.prob(id as u32);
            assert!((got - p).abs() < 1e-5, "{}: p[{id}] {got} vs {p}", case.text);
        }
        check_attention(backend.as_ref(), &seq, &case.attention);
    }
}

#[test]
fn gpt2_matches_reference_forward_pass() {
    let backend = load_backend(&fixture("tiny-gpt2/manifest.json")).unwrap();
    assert!(backend.info().capabilities.causal_scoring);
    assert!(!backend.info().capabilities.masked_prediction);
    for case in expected::<GptCase>("tiny-gpt2") {
        let seq = backend.tokenizer().encode(&case.text, false).unwrap();
        assert_eq!(seq.ids, case.ids, "{}", case.text);
        let lp = backend.next_token_log_probs(&seq).unwrap();
        assert_eq!(lp.len(), case.log_probs.len());
        for (i, (g, w)) in lp.iter().zip(&case.log_probs).enumerate() {
            assert!((g - w).abs() < 1e-4, "{}: log p[{i}] {g} vs {w}", case.text);
        }
        check_attention(backend.as_ref(), &seq, &case.attention);
    }
}

#[test]
fn integer_buffers_are_skipped() {
    let store = read_safetensors(&fixture("tiny-bert/model.safetensors")).unwrap();
    assert!(store.contains_key("bert.embeddings.word_embeddings.weight"));
    assert!(!store.keys().any(|k| k.contains("position_ids")));
}

#[test]
fn missing_tensor_is_a_load_error() {
    let dir = tempfile::tempdir().unwrap();
    let src = fixture("tiny-bert");
    for f in ["vocab.txt", "model.safetensors"] {
        std::fs::copy(src.join(f), dir.path().join(f)).unwrap();
    }
    let mut m = read_manifest(&src.join("manifest.json")).unwrap();
    m.tensors.insert("query.weight".into(), "no.such.{layer}.tensor".into());
    std::fs::write(dir.path().join("manifest.json"), serde_json::to_vec(&m).unwrap()).unwrap();
    let err = load_backend(&dir.path().join("manifest.json")).err().expect("load must fail");
    assert_eq!(err.code(), "load", "{err}");
    assert!(err.to_string().contains("no.such.0.tensor"), "{err}");
}

#[test]
fn claimed_capability_without_weights_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let src = fixture("tiny-gpt2");
    for f in ["vocab.json", "merges.txt", "model.safetensors"] {
        std::fs::copy(src.join(f), dir.path().join(f)).unwrap();
    }
    let mut m = read_manifest(&src.join("manifest.json")).unwrap();
    m.capabilities = Some(vec!["masked-prediction".into()]);
    std::fs::write(dir.path().join("manifest.json"), serde_json::to_vec(&m).unwrap()).unwrap();
    let err = load_backend(&dir.path().join("manifest.json")).err().expect("load must fail");
    assert_eq!(err.code(), "capability", "{err}");
}
