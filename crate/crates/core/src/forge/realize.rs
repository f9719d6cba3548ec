use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::Span;

use super::inflect::number_word;
use super::{Condition, ConditionKind, Lexicon, SentencePattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    WithAny,
    WithoutAny,
}

/// One realized sentence, in the dataset line layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeSentence {
    pub id: u64,
    pub pattern_id: u64,
    pub condition: Condition,
    pub text: String,
    pub any_start: usize,
    pub any_end: usize,
    pub lic_start: usize,
    pub lic_end: usize,
    pub variant: Variant,
}

impl ProbeSentence {
    pub fn any_span(&self) -> Span {
        Span::new(self.any_start, self.any_end)
    }

    pub fn licensor_span(&self) -> Span {
        Span::new(self.lic_start, self.lic_end)
    }

    /// Text with `"any "` removed at the any span.
    pub fn without_any_text(&self) -> Result<String> {
        if self.variant != Variant::WithAny {
            return Err(Error::arg(alloc::format!("sentence {} is not a with-any variant", self.id)));
        }
        let (s, e) = (self.any_start, self.any_end);
        if self.text.get(s..e) != Some("any") || self.text.get(e..e + 1) != Some(" ") {
            return Err(Error::arg(alloc::format!("sentence {}: any span does not cover `any `", self.id)));
        }
        let mut out = String::with_capacity(self.text.len() - 4);
        out.push_str(&self.text[..s]);
        out.push_str(&self.text[e + 1..]);
        Ok(out)
    }

    /// The without-any variant; spans right of the deletion shift left.
    pub fn without_any(&self) -> Result<ProbeSentence> {
        let text = self.without_any_text()?;
        let shift = |pos: usize| if pos > self.any_start { pos - 4 } else { pos };
        Ok(ProbeSentence {
            text,
            any_start: self.any_start,
            any_end: self.any_start,
            lic_start: shift(self.lic_start),
            lic_end: shift(self.lic_end),
            variant: Variant::WithoutAny,
            ..self.clone()
        })
    }
}

struct Builder {
    text: String,
    licensor: Span,
}

impl Builder {
    fn new() -> Self {
        Builder {
            text: String::new(),
            licensor: Span::empty_at(0),
        }
    }

    fn word(&mut self, w: &str) {
        if !self.text.is_empty() {
            self.text.push(' ');
        }
        self.text.push_str(w);
    }

    fn licensor(&mut self, w: &str) {
        self.word(w);
        self.licensor = Span::new(self.text.len() - w.len(), self.text.len());
    }

    fn finish(mut self, pattern_id: u64, condition: Condition, plural_object: &str) -> ProbeSentence {
        self.word("any");
        let any_end = self.text.len();
        self.word(plural_object);
        self.text.push('.');
        ProbeSentence {
            id: pattern_id,
            pattern_id,
            condition,
            text: self.text,
            any_start: any_end - 3,
            any_end,
            lic_start: self.licensor.start,
            lic_end: self.licensor.end,
            variant: Variant::WithAny,
        }
    }
}

/// The with-any sentence for pattern `p` under condition `c`.
///
/// The licensor span covers the licensing expression: `didn't` for NEG,
/// the quantifier with its numerals otherwise (`At least five`), and is
/// empty for AFF.
pub fn realize_condition(lex: &Lexicon, p: &SentencePattern, c: &Condition) -> Result<ProbeSentence> {
    c.validate()?;
    if c.kind.is_pronoun() {
        return Err(Error::arg(
            "pronoun conditions replace the whole subject; use derive_subject_replacement",
        ));
    }
    let subj = lex
        .nouns
        .get(p.subject as usize)
        .ok_or_else(|| Error::arg("subject index outside the lexicon"))?;
    let verb = lex
        .verbs
        .get(p.verb as usize)
        .ok_or_else(|| Error::arg("verb index outside the lexicon"))?;
    let obj = lex
        .nouns
        .get(p.object as usize)
        .ok_or_else(|| Error::arg("object index outside the lexicon"))?;

    let mut b = Builder::new();
    match c.kind {
        ConditionKind::Aff => {
            b.word(subj.art.capitalized());
            b.word(&subj.sg);
            b.word(&verb.past);
        }
        ConditionKind::Neg => {
            b.word(subj.art.capitalized());
            b.word(&subj.sg);
            b.licensor("didn't");
            b.word(&verb.base);
        }
        kind => {
            let quantifier = kind.quantifier_words().unwrap_or_default();
            let phrase = match (c.n, c.n2) {
                (Some(n), Some(n2)) => alloc::format!("{quantifier} {} and {}", number_word(n)?, number_word(n2)?),
                (Some(n), None) => alloc::format!("{quantifier} {}", number_word(n)?),
                _ => String::from(quantifier),
            };
            b.licensor(&phrase);
            b.word(&subj.pl);
            b.word(&verb.past);
        }
    }
    Ok(b.finish(p.id as u64, *c, &obj.pl))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Some,
    No,
}

impl Polarity {
    pub fn pronouns(self) -> [&'static str; 3] {
        match self {
            Polarity::Some => ["Somebody", "Someone", "Something"],
            Polarity::No => ["Nobody", "No one", "Nothing"],
        }
    }

    pub fn condition(self) -> Condition {
        match self {
            Polarity::Some => Condition::plain(ConditionKind::SomePron),
            Polarity::No => Condition::plain(ConditionKind::NoPron),
        }
    }
}

/// Subject-replacement sentences: three pronoun subjects per distinct
/// (verb, object) of the core, duplicate texts removed.
///
/// `pattern_id` is `3·k + j` for the `k`-th distinct predicate and the
/// `j`-th pronoun, so the SOME and NO sets pair row by row.
pub fn derive_subject_replacement(
    lex: &Lexicon,
    core: &[SentencePattern],
    polarity: Polarity,
) -> Result<Vec<ProbeSentence>> {
    let mut seen: BTreeSet<(&str, &str)> = BTreeSet::new();
    let mut out = Vec::new();
    let mut sorted: Vec<&SentencePattern> = core.iter().collect();
    sorted.sort_by_key(|p| p.id);
    for p in sorted {
        let verb = lex
            .verbs
            .get(p.verb as usize)
            .ok_or_else(|| Error::arg("verb index outside the lexicon"))?;
        let obj = lex
            .nouns
            .get(p.object as usize)
            .ok_or_else(|| Error::arg("object index outside the lexicon"))?;
        if !seen.insert((verb.past.as_str(), obj.pl.as_str())) {
            continue;
        }
        let k = (seen.len() - 1) as u64;
        for (j, pronoun) in polarity.pronouns().iter().enumerate() {
            let mut b = Builder::new();
            b.licensor(pronoun);
            b.word(&verb.past);
            let mut s = b.finish(3 * k + j as u64, polarity.condition(), &obj.pl);
            s.id = out.len() as u64;
            out.push(s);
        }
    }
    Ok(out)
}
