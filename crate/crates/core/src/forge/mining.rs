//! Minimal-pair mining from line-delimited natural text.
//!
//! Negation pairs: an auxiliary (`didn't`, `don't`, `doesn't`, `did not`,
//! `does not`, `do not`), then the verb, then `any` within the next four
//! words, directly followed by a plural noun (`-s` heuristic plus a
//! stop-list). The positive side replaces auxiliary + verb by the
//! un-negated form (`didn't buy` → `bought`, `don't buy` → `buy`,
//! `doesn't buy` → `buys`); lines whose verb cannot be inflected are
//! dropped and counted.
//!
//! Nobody pairs: a sentence-initial `nobody` / `no one` subject with
//! `any` + plural noun later in the line; the positive side substitutes
//! `somebody` / `someone`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::tokenizer::Span;

use super::inflect::{capitalize, past_tense, third_singular};
use super::realize::{ProbeSentence, Variant};
use super::{Condition, ConditionKind, Lexicon};

/// Maximum number of words between the verb and `any`.
pub const ANY_WINDOW: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairSource {
    Natural,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transformation {
    #[serde(rename = "neg->aff")]
    NegToAff,
    #[serde(rename = "nobody->somebody")]
    NobodyToSomebody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinimalPair {
    /// 1-based line number in the source corpus.
    pub line: usize,
    pub negative_text: String,
    pub positive_text: String,
    pub source: PairSource,
    pub transformation: Transformation,
    pub negative_licensor: Span,
    pub positive_licensor: Span,
    pub negative_any: Span,
    pub positive_any: Span,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningReport {
    pub lines: usize,
    pub pairs: Vec<MinimalPair>,
    /// Lines that matched the pattern but whose verb could not be rewritten.
    pub dropped: usize,
}

#[derive(Debug, Clone, Copy)]
struct Word {
    /// Span of the word with edge punctuation stripped.
    core: Span,
    /// Whether punctuation follows the core inside the raw word.
    trailing: bool,
}

fn word_at(line: &str, s: usize, e: usize) -> Word {
    let raw = &line[s..e];
    let is_edge = |c: char| !c.is_alphanumeric() && c != '\'' && c != '\u{2019}' && c != '-';
    let lead = raw.len() - raw.trim_start_matches(|c: char| !c.is_alphanumeric()).len();
    let body = &raw[lead..];
    let core_len = body.trim_end_matches(is_edge).len();
    // a trailing apostrophe is punctuation, not a contraction
    let core_len = body[..core_len].trim_end_matches(['\'', '\u{2019}']).len();
    Word {
        core: Span::new(s + lead, s + lead + core_len),
        trailing: lead + core_len < raw.len(),
    }
}

fn words(line: &str) -> Vec<Word> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        match (ch.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(word_at(line, s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(word_at(line, s, line.len()));
    }
    out
}

fn lower_core(line: &str, w: &Word) -> String {
    line[w.core.start..w.core.end].to_lowercase().replace('\u{2019}', "'")
}

const PLURAL_STOP: &[&str] = &[
    "this", "his", "its", "was", "is", "has", "does", "yes", "thus", "always", "perhaps",
    "sometimes", "means", "news", "series", "species", "us", "was", "whereas", "besides",
    "towards", "afterwards", "less", "unless", "across", "various", "serious", "famous",
    "previous", "obvious", "nervous", "anxious", "curious", "jealous", "gas", "bus", "lens",
    "chaos", "physics", "mathematics", "politics", "ours", "yours", "theirs", "hers",
];

fn is_plural(word: &str) -> bool {
    word.len() >= 3
        && word.chars().all(|c| c.is_ascii_lowercase())
        && word.ends_with('s')
        && !word.ends_with("ss")
        && !word.ends_with("us")
        && !word.ends_with("is")
        && !PLURAL_STOP.contains(&word)
}

/// Words that cannot be the lexical verb right after the auxiliary.
const NOT_A_VERB: &[&str] = &[
    "even", "really", "ever", "always", "actually", "just", "yet", "necessarily", "quite",
    "then", "so", "all", "also", "seem", "any", "anything", "anybody", "anyone", "much",
    "you", "we", "they", "i", "he", "she", "it", "need", "dare", "think", "believe",
];

#[derive(Clone, Copy)]
enum Aux {
    Did,
    Do,
    Does,
}

fn aux_at(line: &str, ws: &[Word], i: usize) -> Option<(Aux, usize)> {
    let w = lower_core(line, &ws[i]);
    let contracted = match w.as_str() {
        "didn't" => Some(Aux::Did),
        "don't" => Some(Aux::Do),
        "doesn't" => Some(Aux::Does),
        _ => None,
    };
    if let Some(aux) = contracted {
        return (!ws[i].trailing).then_some((aux, i + 1));
    }
    let full = match w.as_str() {
        "did" => Aux::Did,
        "do" => Aux::Do,
        "does" => Aux::Does,
        _ => return None,
    };
    let next = ws.get(i + 1)?;
    (!ws[i].trailing && !next.trailing && lower_core(line, next) == "not").then_some((full, i + 2))
}

/// Finds `any` + plural in `ws[from..to]`; returns the index of `any`.
fn any_plural(line: &str, ws: &[Word], from: usize, to: usize) -> Option<usize> {
    (from..to.min(ws.len())).find(|&k| {
        !ws[k].trailing
            && lower_core(line, &ws[k]) == "any"
            && ws
                .get(k + 1)
                .is_some_and(|next| is_plural(&lower_core(line, next)))
    })
}

enum LineMatch {
    Pair(MinimalPair),
    Dropped,
    None,
}

fn match_negation(lineno: usize, line: &str, lex: Option<&Lexicon>) -> LineMatch {
    let ws = words(line);
    for i in 0..ws.len() {
        let Some((aux, verb_idx)) = aux_at(line, &ws, i) else { continue };
        let Some(verb_word) = ws.get(verb_idx) else { continue };
        let verb = lower_core(line, verb_word);
        if verb_word.trailing || !verb.chars().all(|c| c.is_ascii_lowercase()) {
            continue;
        }
        let Some(any_idx) = any_plural(line, &ws, verb_idx + 1, verb_idx + 1 + ANY_WINDOW) else {
            continue;
        };
        if NOT_A_VERB.contains(&verb.as_str()) {
            return LineMatch::Dropped;
        }
        let form = match aux {
            Aux::Did => past_tense(&verb, lex),
            Aux::Do => Some(verb.clone()),
            Aux::Does => third_singular(&verb),
        };
        let Some(mut form) = form else { return LineMatch::Dropped };
        let aux_word = &ws[i];
        if line[aux_word.core.start..].starts_with(|c: char| c.is_uppercase()) {
            form = capitalize(&form);
        }
        let neg_lic = Span::new(aux_word.core.start, verb_word.core.end);
        let positive_text = alloc::format!("{}{}{}", &line[..neg_lic.start], form, &line[neg_lic.end..]);
        let pos_lic = Span::new(neg_lic.start, neg_lic.start + form.len());
        let any = ws[any_idx].core;
        let shift = neg_lic.len() as isize - form.len() as isize;
        let pos_any = Span::new(
            (any.start as isize - shift) as usize,
            (any.end as isize - shift) as usize,
        );
        return LineMatch::Pair(MinimalPair {
            line: lineno,
            negative_text: line.to_string(),
            positive_text,
            source: PairSource::Natural,
            transformation: Transformation::NegToAff,
            negative_licensor: neg_lic,
            positive_licensor: pos_lic,
            negative_any: any,
            positive_any: pos_any,
        });
    }
    LineMatch::None
}

fn match_nobody(lineno: usize, line: &str) -> LineMatch {
    let ws = words(line);
    let Some(first) = ws.first() else { return LineMatch::None };
    let w0 = lower_core(line, first);
    let (subject, rest_from, replacement) = if w0 == "nobody" && !first.trailing {
        (first.core, 1, "somebody")
    } else if w0 == "no"
        && !first.trailing
        && ws.get(1).is_some_and(|w| !w.trailing && lower_core(line, w) == "one")
    {
        (Span::new(first.core.start, ws[1].core.end), 2, "someone")
    } else {
        return LineMatch::None;
    };
    let Some(any_idx) = any_plural(line, &ws, rest_from, ws.len()) else { return LineMatch::None };
    let original = &line[subject.start..subject.end];
    let form = if original.starts_with(|c: char| c.is_uppercase()) {
        capitalize(replacement)
    } else {
        replacement.to_string()
    };
    let positive_text = alloc::format!("{}{}{}", &line[..subject.start], form, &line[subject.end..]);
    let any = ws[any_idx].core;
    let shift = subject.len() as isize - form.len() as isize;
    LineMatch::Pair(MinimalPair {
        line: lineno,
        negative_text: line.to_string(),
        positive_text,
        source: PairSource::Natural,
        transformation: Transformation::NobodyToSomebody,
        negative_licensor: subject,
        positive_licensor: Span::new(subject.start, subject.start + form.len()),
        negative_any: any,
        positive_any: Span::new((any.start as isize - shift) as usize, (any.end as isize - shift) as usize),
    })
}

fn mine(corpus: &str, mut matcher: impl FnMut(usize, &str) -> LineMatch) -> MiningReport {
    let mut report = MiningReport::default();
    for (i, raw) in corpus.lines().enumerate() {
        report.lines += 1;
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        match matcher(i + 1, line) {
            LineMatch::Pair(p) => report.pairs.push(p),
            LineMatch::Dropped => report.dropped += 1,
            LineMatch::None => {}
        }
    }
    report
}

/// Sentential-negation pairs (`neg→aff`).
pub fn mine_negation_pairs(corpus: &str, lexicon: Option<&Lexicon>) -> MiningReport {
    mine(corpus, |n, line| match_negation(n, line, lexicon))
}

/// `nobody`/`no one` subject pairs (`nobody→somebody`).
pub fn mine_nobody_pairs(corpus: &str) -> MiningReport {
    mine(corpus, match_nobody)
}

/// Splits mined pairs into the two paired datasets (NEG/AFF or
/// NO_PRON/SOME_PRON); `pattern_id` and `id` are the pair index.
pub fn pairs_to_datasets(pairs: &[MinimalPair]) -> (Vec<ProbeSentence>, Vec<ProbeSentence>) {
    let mut negative = Vec::with_capacity(pairs.len());
    let mut positive = Vec::with_capacity(pairs.len());
    for (k, p) in pairs.iter().enumerate() {
        let (neg_kind, pos_kind) = match p.transformation {
            Transformation::NegToAff => (ConditionKind::Neg, ConditionKind::Aff),
            Transformation::NobodyToSomebody => (ConditionKind::NoPron, ConditionKind::SomePron),
        };
        let make = |text: &str, kind, any: Span, lic: Span| ProbeSentence {
            id: k as u64,
            pattern_id: k as u64,
            condition: Condition::plain(kind),
            text: text.to_string(),
            any_start: any.start,
            any_end: any.end,
            lic_start: lic.start,
            lic_end: lic.end,
            variant: Variant::WithAny,
        };
        negative.push(make(&p.negative_text, neg_kind, p.negative_any, p.negative_licensor));
        positive.push(make(&p.positive_text, pos_kind, p.positive_any, p.positive_licensor));
    }
    (negative, positive)
}
