use alloc::string::String;
use alloc::vec::Vec;

use super::{Span, Tokenizer};

const MAX_WORD_CHARS: usize = 100;

/// A normalized word with, for each normalized char, the source span of the
/// char it came from.
struct Word {
    chars: Vec<char>,
    origin: Vec<Span>,
}

impl Word {
    fn new() -> Self {
        Word {
            chars: Vec::new(),
            origin: Vec::new(),
        }
    }

    fn span(&self, from: usize, to: usize) -> Span {
        Span::new(self.origin[from].start, self.origin[to - 1].end)
    }
}

const LITERAL_SPECIALS: [&str; 5] = ["[MASK]", "[CLS]", "[SEP]", "[UNK]", "[PAD]"];

pub(super) fn encode_into(tok: &Tokenizer, text: &str, ids: &mut Vec<u32>, spans: &mut Vec<Span>) {
    // bracketed markers typed into the text stay whole
    let mut base = 0;
    loop {
        let rest = &text[base..];
        let hit = LITERAL_SPECIALS
            .iter()
            .filter_map(|m| Some((rest.find(m)?, *m, tok.token_id(m)?)))
            .min_by_key(|(at, _, _)| *at);
        let Some((at, marker, id)) = hit else {
            for word in split_words(rest, base, tok.lowercase) {
                wordpiece(tok, &word, ids, spans);
            }
            return;
        };
        for word in split_words(&rest[..at], base, tok.lowercase) {
            wordpiece(tok, &word, ids, spans);
        }
        ids.push(id);
        spans.push(Span::new(base + at, base + at + marker.len()));
        base += at + marker.len();
    }
}

fn split_words(text: &str, base: usize, lowercase: bool) -> Vec<Word> {
    let mut words = Vec::new();
    let mut current = Word::new();
    let flush = |current: &mut Word, words: &mut Vec<Word>| {
        if !current.chars.is_empty() {
            words.push(core::mem::replace(current, Word::new()));
        }
    };
    for (offset, ch) in text.char_indices() {
        let span = Span::new(base + offset, base + offset + ch.len_utf8());
        if ch == '\0' || ch == '\u{fffd}' || (ch.is_control() && !ch.is_whitespace()) {
            continue;
        }
        if ch.is_whitespace() {
            flush(&mut current, &mut words);
            continue;
        }
        if is_punctuation(ch) || is_cjk(ch) {
            flush(&mut current, &mut words);
            let mut single = Word::new();
            push_normalized(&mut single, ch, span, lowercase);
            words.push(single);
            continue;
        }
        push_normalized(&mut current, ch, span, lowercase);
    }
    flush(&mut current, &mut words);
    words
}

fn push_normalized(word: &mut Word, ch: char, span: Span, lowercase: bool) {
    if lowercase {
        for lower in ch.to_lowercase() {
            word.chars.push(strip_accent(lower));
            word.origin.push(span);
        }
    } else {
        word.chars.push(ch);
        word.origin.push(span);
    }
}

fn wordpiece(tok: &Tokenizer, word: &Word, ids: &mut Vec<u32>, spans: &mut Vec<Span>) {
    let n = word.chars.len();
    let unk = tok.specials.unk;
    if n > MAX_WORD_CHARS {
        if let Some(unk) = unk {
            ids.push(unk);
            spans.push(word.span(0, n));
        }
        return;
    }
    let mut pieces: Vec<(u32, Span)> = Vec::new();
    let mut start = 0;
    let mut candidate = String::new();
    while start < n {
        let mut end = n;
        let mut found = None;
        while start < end {
            candidate.clear();
            if start > 0 {
                candidate.push_str("##");
            }
            candidate.extend(&word.chars[start..end]);
            if let Some(id) = tok.token_id(&candidate) {
                found = Some(id);
                break;
            }
            end -= 1;
        }
        match found {
            Some(id) => {
                pieces.push((id, word.span(start, end)));
                start = end;
            }
            None => {
                // whole word falls back to the unknown marker
                if let Some(unk) = unk {
                    ids.push(unk);
                    spans.push(word.span(0, n));
                }
                return;
            }
        }
    }
    for (id, span) in pieces {
        ids.push(id);
        spans.push(span);
    }
}

fn is_punctuation(ch: char) -> bool {
    if ch.is_ascii() {
        return ch.is_ascii_punctuation();
    }
    matches!(
        ch,
        '\u{2010}'..='\u{2027}' | '\u{2030}'..='\u{205e}' | '\u{00a1}' | '\u{00a7}' | '\u{00ab}'
            | '\u{00b6}' | '\u{00b7}' | '\u{00bb}' | '\u{00bf}' | '\u{3001}'..='\u{3003}'
    )
}

fn is_cjk(ch: char) -> bool {
    matches!(ch as u32,
        0x4E00..=0x9FFF | 0x3400..=0x4DBF | 0x20000..=0x2A6DF | 0x2A700..=0x2B73F
        | 0x2B740..=0x2B81F | 0x2B820..=0x2CEAF | 0xF900..=0xFAFF | 0x2F800..=0x2FA1F)
}

/// Drops diacritics from precomposed Latin-1 / Latin Extended-A letters.
fn strip_accent(ch: char) -> char {
    match ch {
        'à' | 'á' | 'â' | 'ã' | 'ä' | 'å' | 'ā' | 'ă' | 'ą' => 'a',
        'ç' | 'ć' | 'ĉ' | 'ċ' | 'č' => 'c',
        'ď' => 'd',
        'è' | 'é' | 'ê' | 'ë' | 'ē' | 'ĕ' | 'ė' | 'ę' | 'ě' => 'e',
        'ĝ' | 'ğ' | 'ġ' | 'ģ' => 'g',
        'ĥ' => 'h',
        'ì' | 'í' | 'î' | 'ï' | 'ĩ' | 'ī' | 'ĭ' | 'į' => 'i',
        'ĵ' => 'j',
        'ķ' => 'k',
        'ĺ' | 'ļ' | 'ľ' => 'l',
        'ñ' | 'ń' | 'ņ' | 'ň' => 'n',
        'ò' | 'ó' | 'ô' | 'õ' | 'ö' | 'ō' | 'ŏ' | 'ő' => 'o',
        'ŕ' | 'ŗ' | 'ř' => 'r',
        'ś' | 'ŝ' | 'ş' | 'š' => 's',
        'ţ' | 'ť' => 't',
        'ù' | 'ú' | 'û' | 'ü' | 'ũ' | 'ū' | 'ŭ' | 'ů' | 'ű' | 'ų' => 'u',
        'ŵ' => 'w',
        'ý' | 'ÿ' | 'ŷ' => 'y',
        'ź' | 'ż' | 'ž' => 'z',
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::super::Tokenizer;
    use super::*;

    fn bert_like() -> Tokenizer {
        let vocab = "[PAD]\n[UNK]\n[CLS]\n[SEP]\n[MASK]\na\ngirl\ncrossed\nany\nroads\n.\nun\n##sto\n##ppa\n##ble\ndidn\n'\nt\n";
        Tokenizer::from_wordpiece_vocab(vocab, true).unwrap()
    }

    #[test]
    fn bracketed_by_markers() {
        let tok = bert_like();
        let seq = tok.encode("A girl crossed any roads.", true).unwrap();
        let names: Vec<_> = seq.ids.iter().map(|&i| tok.token(i).unwrap()).collect();
        assert_eq!(names, ["[CLS]", "a", "girl", "crossed", "any", "roads", ".", "[SEP]"]);
        assert_eq!(seq.spans[4], Span::new(15, 18));
    }

    #[test]
    fn continuation_pieces_and_unknowns() {
        let tok = bert_like();
        let seq = tok.encode("unstoppable zebra", false).unwrap();
        let names: Vec<_> = seq.ids.iter().map(|&i| tok.token(i).unwrap()).collect();
        assert_eq!(names, ["un", "##sto", "##ppa", "##ble", "[UNK]"]);
        assert_eq!(seq.spans[1], Span::new(2, 5));
        assert_eq!(seq.spans[4], Span::new(12, 17));
        assert_eq!(tok.decode(&seq.ids), "unstoppable [UNK]");
    }

    #[test]
    fn contraction_splits_on_apostrophe() {
        let tok = bert_like();
        let seq = tok.encode("didn't", false).unwrap();
        let names: Vec<_> = seq.ids.iter().map(|&i| tok.token(i).unwrap()).collect();
        assert_eq!(names, ["didn", "'", "t"]);
    }

    #[test]
    fn accents_and_case_are_normalized() {
        let tok = bert_like();
        let seq = tok.encode("GÍRL", false).unwrap();
        assert_eq!(seq.ids, [tok.token_id("girl").unwrap()]);
        assert_eq!(seq.spans[0], Span::new(0, 5));
    }
}
