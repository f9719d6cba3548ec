#![allow(dead_code)]

use std::collections::BTreeMap;

use npiprobe_core::forge::{Article, Lexicon, Noun, Verb};
use npiprobe_core::mock::{MockBackend, MockConfig};
use npiprobe_core::tokenizer::byte_to_unicode;
use npiprobe_core::Tokenizer;

pub const SPECIALS: [&str; 4] = ["[CLS]", "[SEP]", "[MASK]", "[UNK]"];

/// WordPiece vocabulary: specials, then `words`, then `extra`.
pub fn wordpiece(words: &[&str]) -> Tokenizer {
    let mut lines: Vec<&str> = SPECIALS.to_vec();
    lines.extend_from_slice(words);
    Tokenizer::from_wordpiece_vocab(&(lines.join("\n") + "\n"), true).unwrap()
}

/// Byte-level BPE with every byte symbol, the boundary marker, and the
/// given merges (each merge's result is added to the vocabulary).
pub fn bpe(merges: &[(&str, &str)]) -> Tokenizer {
    let mut map = BTreeMap::new();
    for b in 0u8..=255 {
        let id = map.len() as u32;
        map.insert(byte_to_unicode(b).to_string(), id);
    }
    let mut text = String::from("#version: 0.2\n");
    for (a, b) in merges {
        let merged = format!("{a}{b}");
        if !map.contains_key(&merged) {
            let id = map.len() as u32;
            map.insert(merged, id);
        }
        text.push_str(&format!("{a} {b}\n"));
    }
    let id = map.len() as u32;
    map.insert("<|endoftext|>".into(), id);
    Tokenizer::from_bpe(map, &text).unwrap()
}

pub fn noun(sg: &str, pl: &str) -> Noun {
    Noun {
        sg: sg.into(),
        pl: pl.into(),
        art: if sg.starts_with(['a', 'e', 'i', 'o', 'u']) { Article::An } else { Article::A },
    }
}

pub fn verb(base: &str, past: &str) -> Verb {
    Verb {
        base: base.into(),
        past: past.into(),
        invariant: base == past,
    }
}

/// `n` synthetic nouns `nounK`/`nounKs` and `v` verbs `verbK`/`verbKed`.
pub fn synthetic_lexicon(n: usize, v: usize) -> Lexicon {
    Lexicon {
        nouns: (0..n).map(|i| noun(&format!("noun{i}"), &format!("noun{i}s"))).collect(),
        verbs: (0..v).map(|i| verb(&format!("verb{i}"), &format!("verb{i}ed"))).collect(),
    }
}

pub fn small_lexicon() -> Lexicon {
    Lexicon {
        nouns: vec![
            noun("girl", "girls"),
            noun("road", "roads"),
            noun("game", "games"),
            noun("story", "stories"),
            noun("air", "airs"),
        ],
        verbs: vec![verb("cross", "crossed"), verb("tell", "told"), verb("put", "put")],
    }
}

pub fn mock(tok: Tokenizer, layers: usize, heads: usize, config: &MockConfig) -> MockBackend {
    MockBackend::new("mock", layers, heads, tok, config).unwrap()
}
