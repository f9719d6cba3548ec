//! WordPiece and byte-level BPE tokenizers with source alignment.
//!
//! Every emitted token carries the byte span of the input text it covers.
//! Special markers carry empty spans (at offset 0 for the start marker and
//! at the end of the text for the end marker).

mod bpe;
mod wordpiece;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bpe::{byte_to_unicode, pre_tokenize};

/// Half-open byte range into a source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub const fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub const fn empty_at(pos: usize) -> Self {
        Span {
            start: pos,
            end: pos,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    /// True when both spans share at least one byte.
    pub fn intersects(&self, other: &Span) -> bool {
        !self.is_empty() && !other.is_empty() && self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerKind {
    #[serde(alias = "wordpiece-style")]
    WordPiece,
    #[serde(alias = "bpe-style")]
    Bpe,
}

/// Ids of the special markers a tokenizer knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SpecialTokens {
    pub start: Option<u32>,
    pub end: Option<u32>,
    pub mask: Option<u32>,
    pub unk: Option<u32>,
}

/// Token ids plus the source span of each id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub spans: Vec<Span>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Positions whose span intersects `span`, in order.
    pub fn positions_within(&self, span: &Span) -> Vec<usize> {
        self.spans
            .iter()
            .enumerate()
            .filter(|(_, s)| s.intersects(span))
            .map(|(i, _)| i)
            .collect()
    }

    /// A copy with the token at `pos` replaced.
    pub fn with_replaced(&self, pos: usize, id: u32) -> TokenSequence {
        let mut out = self.clone();
        out.ids[pos] = id;
        out
    }

    /// A copy with `id` prepended under an empty span at offset 0.
    pub fn with_prefix(&self, id: u32) -> TokenSequence {
        let mut ids = Vec::with_capacity(self.ids.len() + 1);
        ids.push(id);
        ids.extend_from_slice(&self.ids);
        let mut spans = Vec::with_capacity(ids.len());
        spans.push(Span::empty_at(0));
        spans.extend_from_slice(&self.spans);
        TokenSequence { ids, spans }
    }
}

/// A loaded vocabulary with its segmentation rules.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    kind: TokenizerKind,
    vocab: Vec<String>,
    ids: BTreeMap<String, u32>,
    specials: SpecialTokens,
    lowercase: bool,
    merges: BTreeMap<(String, String), u32>,
}

const WORDPIECE_START: &str = "[CLS]";
const WORDPIECE_END: &str = "[SEP]";
const WORDPIECE_MASK: &str = "[MASK]";
const WORDPIECE_UNK: &str = "[UNK]";
const BPE_BOUNDARY: &str = "<|endoftext|>";
const BPE_MASK: &str = "<mask>";
const BPE_UNK: &str = "<unk>";

impl Tokenizer {
    /// Parses a WordPiece vocabulary: one token per line, id = 0-based line.
    pub fn from_wordpiece_vocab(text: &str, lowercase: bool) -> Result<Tokenizer> {
        let mut vocab = Vec::new();
        let mut ids = BTreeMap::new();
        let body = text.strip_suffix('\n').unwrap_or(text);
        for (lineno, raw) in body.split('\n').enumerate() {
            let token = raw.strip_suffix('\r').unwrap_or(raw);
            if token.is_empty() {
                return Err(Error::format(lineno + 1, "empty token"));
            }
            let id = vocab.len() as u32;
            if ids.insert(token.to_string(), id).is_some() {
                return Err(Error::format(
                    lineno + 1,
                    alloc::format!("duplicate token `{token}`"),
                ));
            }
            vocab.push(token.to_string());
        }
        if vocab.is_empty() {
            return Err(Error::format(1, "empty vocabulary"));
        }
        let specials = SpecialTokens {
            start: ids.get(WORDPIECE_START).copied(),
            end: ids.get(WORDPIECE_END).copied(),
            mask: ids.get(WORDPIECE_MASK).copied(),
            unk: ids.get(WORDPIECE_UNK).copied(),
        };
        Ok(Tokenizer {
            kind: TokenizerKind::WordPiece,
            vocab,
            ids,
            specials,
            lowercase,
            merges: BTreeMap::new(),
        })
    }

    /// Builds a byte-level BPE tokenizer from a token→id map and the text of
    /// a merges file (`a b` per line, optional `#version` header).
    pub fn from_bpe(map: BTreeMap<String, u32>, merges_text: &str) -> Result<Tokenizer> {
        let n = map.len();
        let mut vocab = alloc::vec![String::new(); n];
        let mut seen = alloc::vec![false; n];
        for (token, &id) in &map {
            let slot = id as usize;
            if slot >= n {
                return Err(Error::format(
                    0,
                    alloc::format!("id {id} of `{token}` is not dense in 0..{n}"),
                ));
            }
            if seen[slot] {
                return Err(Error::format(0, alloc::format!("id {id} assigned twice")));
            }
            seen[slot] = true;
            vocab[slot] = token.clone();
        }
        for b in 0u8..=255 {
            let sym = byte_to_unicode(b).to_string();
            if !map.contains_key(&sym) {
                return Err(Error::format(
                    0,
                    alloc::format!("byte symbol for 0x{b:02x} missing from vocabulary"),
                ));
            }
        }
        let mut merges = BTreeMap::new();
        for (lineno, raw) in merges_text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.is_empty() || (lineno == 0 && line.starts_with("#version")) {
                continue;
            }
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => {
                    let rank = merges.len() as u32;
                    merges.entry((a.to_string(), b.to_string())).or_insert(rank);
                }
                _ => return Err(Error::format(lineno + 1, "expected two symbols per merge line")),
            }
        }
        let specials = SpecialTokens {
            start: map.get(BPE_BOUNDARY).copied(),
            end: map.get(BPE_BOUNDARY).copied(),
            mask: map.get(BPE_MASK).copied(),
            unk: map.get(BPE_UNK).copied(),
        };
        Ok(Tokenizer {
            kind: TokenizerKind::Bpe,
            vocab,
            ids: map,
            specials,
            lowercase: false,
            merges,
        })
    }

    pub fn kind(&self) -> TokenizerKind {
        self.kind
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn specials(&self) -> SpecialTokens {
        self.specials
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }

    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.vocab.get(id as usize).map(String::as_str)
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    /// Fails unless the vocabulary defines a mask marker.
    pub fn require_mask(&self) -> Result<u32> {
        self.specials
            .mask
            .ok_or_else(|| Error::capability("tokenizer has no mask token"))
    }

    /// Segments `text`. With `with_specials`, the sequence is bracketed by
    /// the start and end markers when the vocabulary defines them.
    pub fn encode(&self, text: &str, with_specials: bool) -> Result<TokenSequence> {
        if text.is_empty() {
            return Err(Error::arg("cannot encode empty text"));
        }
        let mut ids = Vec::new();
        let mut spans = Vec::new();
        if with_specials {
            if let Some(start) = self.specials.start {
                ids.push(start);
                spans.push(Span::empty_at(0));
            }
        }
        match self.kind {
            TokenizerKind::WordPiece => wordpiece::encode_into(self, text, &mut ids, &mut spans),
            TokenizerKind::Bpe => bpe::encode_into(self, text, &mut ids, &mut spans),
        }
        if with_specials {
            if let Some(end) = self.specials.end {
                ids.push(end);
                spans.push(Span::empty_at(text.len()));
            }
        }
        Ok(TokenSequence { ids, spans })
    }

    /// Inverse of [`Tokenizer::encode`] up to normalization: WordPiece joins
    /// words with single spaces and glues `##` continuations; BPE restores
    /// the original bytes. Special markers are dropped.
    pub fn decode(&self, ids: &[u32]) -> String {
        let is_special = |id: u32| {
            Some(id) == self.specials.start
                || Some(id) == self.specials.end
                || Some(id) == self.specials.mask
        };
        match self.kind {
            TokenizerKind::WordPiece => {
                let mut out = String::new();
                for &id in ids.iter().filter(|&&id| !is_special(id)) {
                    let tok = self.token(id).unwrap_or(WORDPIECE_UNK);
                    if let Some(rest) = tok.strip_prefix("##") {
                        out.push_str(rest);
                    } else {
                        if !out.is_empty() {
                            out.push(' ');
                        }
                        out.push_str(tok);
                    }
                }
                out
            }
            TokenizerKind::Bpe => {
                let mut bytes = Vec::new();
                for &id in ids.iter().filter(|&&id| !is_special(id)) {
                    if let Some(tok) = self.token(id) {
                        bpe::unicode_to_bytes(tok, &mut bytes);
                    }
                }
                String::from_utf8_lossy(&bytes).into_owned()
            }
        }
    }

    pub(crate) fn merge_rank(&self, a: &str, b: &str) -> Option<u32> {
        // BTreeMap<(String, String), _> cannot be probed with borrowed &strs.
        self.merges.get(&(a.to_string(), b.to_string())).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "[CLS]\n[SEP]\n[MASK]\n[UNK]\na\nb\n";

    #[test]
    fn six_line_vocab_gets_line_number_ids() {
        let tok = Tokenizer::from_wordpiece_vocab(FIXTURE, true).unwrap();
        assert_eq!(tok.vocab_size(), 6);
        for (i, t) in ["[CLS]", "[SEP]", "[MASK]", "[UNK]", "a", "b"].iter().enumerate() {
            assert_eq!(tok.token_id(t), Some(i as u32));
        }
    }

    #[test]
    fn duplicate_token_is_format_error_on_its_line() {
        let err = Tokenizer::from_wordpiece_vocab("[CLS]\nany\nroad\nany\n", true).unwrap_err();
        assert_eq!(
            err,
            Error::Format {
                line: 4,
                message: "duplicate token `any`".into()
            }
        );
    }

    #[test]
    fn hand_encoded_fixture() {
        let tok = Tokenizer::from_wordpiece_vocab(FIXTURE, true).unwrap();
        let seq = tok.encode("a b", true).unwrap();
        assert_eq!(seq.ids, [0, 4, 5, 1]);
        assert_eq!(
            seq.spans,
            [Span::empty_at(0), Span::new(0, 1), Span::new(2, 3), Span::empty_at(3)]
        );
    }

    #[test]
    fn empty_text_is_rejected() {
        let tok = Tokenizer::from_wordpiece_vocab(FIXTURE, true).unwrap();
        assert!(matches!(tok.encode("", true), Err(Error::Argument(_))));
    }

    #[test]
    fn missing_mask_is_capability_error() {
        let tok = Tokenizer::from_wordpiece_vocab("[CLS]\n[SEP]\nany\n", true).unwrap();
        assert!(matches!(tok.require_mask(), Err(Error::Capability(_))));
    }
}
