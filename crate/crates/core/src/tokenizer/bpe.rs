//! GPT-2 style byte-level BPE.

use alloc::string::String;
use alloc::vec::Vec;

use super::{Span, Tokenizer};

/// The reversible byte → printable-char table used by byte-level BPE vocabularies.
pub fn byte_to_unicode(b: u8) -> char {
    let printable = matches!(b, b'!'..=b'~' | 0xA1..=0xAC | 0xAE..=0xFF);
    if printable {
        return b as char;
    }
    let mut shift = 0u32;
    for c in 0u8..b {
        if !matches!(c, b'!'..=b'~' | 0xA1..=0xAC | 0xAE..=0xFF) {
            shift += 1;
        }
    }
    char::from_u32(256 + shift).unwrap_or('\u{fffd}')
}

fn unicode_to_byte(ch: char) -> Option<u8> {
    let code = ch as u32;
    if code < 256 {
        let b = code as u8;
        if matches!(b, b'!'..=b'~' | 0xA1..=0xAC | 0xAE..=0xFF) {
            return Some(b);
        }
        return None;
    }
    let target = code - 256;
    let mut shift = 0u32;
    for c in 0u8..=255 {
        if !matches!(c, b'!'..=b'~' | 0xA1..=0xAC | 0xAE..=0xFF) {
            if shift == target {
                return Some(c);
            }
            shift += 1;
        }
    }
    None
}

pub(super) fn unicode_to_bytes(token: &str, out: &mut Vec<u8>) {
    out.extend(token.chars().filter_map(unicode_to_byte));
}

#[derive(Clone, Copy, PartialEq)]
enum Class {
    Letter,
    Number,
    Space,
    Other,
}

fn class(ch: char) -> Class {
    if ch.is_whitespace() {
        Class::Space
    } else if ch.is_alphabetic() {
        Class::Letter
    } else if ch.is_numeric() {
        Class::Number
    } else {
        Class::Other
    }
}

/// Splits text the way the GPT-2 pattern
/// `'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+`
/// does, returning byte spans.
pub fn pre_tokenize(text: &str) -> Vec<Span> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let end_of = |i: usize| chars.get(i).map(|&(o, _)| o).unwrap_or(text.len());
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (start, ch) = chars[i];
        if ch == '\'' {
            let rest = &text[start + 1..];
            let len = ["s", "t", "m", "d"]
                .iter()
                .chain(["re", "ve", "ll"].iter())
                .find(|suffix| rest.starts_with(**suffix))
                .map(|s| s.len());
            if let Some(len) = len {
                out.push(Span::new(start, start + 1 + len));
                i += 1 + len;
                continue;
            }
        }
        let (lead, body) = if ch == ' ' {
            match chars.get(i + 1).map(|&(_, c)| class(c)) {
                Some(c @ (Class::Letter | Class::Number | Class::Other)) => (1, c),
                _ => (0, Class::Space),
            }
        } else {
            (0, class(ch))
        };
        let mut j = i + lead;
        if body == Class::Space {
            while j < chars.len() && class(chars[j].1) == Class::Space {
                j += 1;
            }
            // `\s+(?!\S)` leaves the last space for the following word
            if j < chars.len() && j - i > 1 {
                j -= 1;
            }
        } else {
            while j < chars.len() && class(chars[j].1) == body {
                j += 1;
            }
        }
        out.push(Span::new(start, end_of(j)));
        i = j;
    }
    out
}

pub(super) fn encode_into(tok: &Tokenizer, text: &str, ids: &mut Vec<u32>, spans: &mut Vec<Span>) {
    for piece in pre_tokenize(text) {
        let bytes = &text.as_bytes()[piece.start..piece.end];
        // (symbol, start byte, end byte) relative to the piece
        let mut symbols: Vec<(String, usize, usize)> = bytes
            .iter()
            .enumerate()
            .map(|(k, &b)| {
                let mut s = String::new();
                s.push(byte_to_unicode(b));
                (s, k, k + 1)
            })
            .collect();
        loop {
            let best = symbols
                .windows(2)
                .enumerate()
                .filter_map(|(k, w)| tok.merge_rank(&w[0].0, &w[1].0).map(|r| (r, k)))
                .min();
            let Some((rank, _)) = best else { break };
            let mut merged = Vec::with_capacity(symbols.len());
            let mut k = 0;
            while k < symbols.len() {
                if k + 1 < symbols.len()
                    && tok.merge_rank(&symbols[k].0, &symbols[k + 1].0) == Some(rank)
                {
                    let mut s = symbols[k].0.clone();
                    s.push_str(&symbols[k + 1].0);
                    merged.push((s, symbols[k].1, symbols[k + 1].2));
                    k += 2;
                } else {
                    merged.push(symbols[k].clone());
                    k += 1;
                }
            }
            symbols = merged;
        }
        for (sym, from, to) in symbols {
            let span = Span::new(piece.start + from, piece.start + to);
            match tok.token_id(&sym) {
                Some(id) => {
                    ids.push(id);
                    spans.push(span);
                }
                None => {
                    // byte symbols are guaranteed present at load time
                    for (k, ch) in sym.chars().enumerate() {
                        if let Some(id) = tok.token_id(ch.encode_utf8(&mut [0; 4])) {
                            ids.push(id);
                            spans.push(Span::new(span.start + k, span.start + k + 1));
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pieces(text: &str) -> Vec<&str> {
        pre_tokenize(text).iter().map(|s| &text[s.start..s.end]).collect()
    }

    #[test]
    fn byte_table_is_a_bijection() {
        let mut seen = alloc::collections::BTreeSet::new();
        for b in 0u8..=255 {
            let ch = byte_to_unicode(b);
            assert!(seen.insert(ch));
            assert_eq!(unicode_to_byte(ch), Some(b));
        }
        assert_eq!(byte_to_unicode(b' '), 'Ġ');
        assert_eq!(byte_to_unicode(b'\n'), 'Ċ');
    }

    #[test]
    fn gpt2_pattern_splits() {
        assert_eq!(
            pieces("Few girls crossed any roads."),
            ["Few", " girls", " crossed", " any", " roads", "."]
        );
        assert_eq!(pieces("I'll  go"), ["I", "'ll", " ", " go"]);
        assert_eq!(pieces("a\n\nb  "), ["a", "\n", "\n", "b", "  "]);
        assert_eq!(pieces("x 12 !?"), ["x", " 12", " !?"]);
    }
}
