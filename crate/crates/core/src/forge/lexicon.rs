use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_NOUN_CAP: usize = 100;
pub const DEFAULT_VERB_CAP: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Article {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "an")]
    An,
}

impl Article {
    pub fn lower(self) -> &'static str {
        match self {
            Article::A => "a",
            Article::An => "an",
        }
    }

    pub fn capitalized(self) -> &'static str {
        match self {
            Article::A => "A",
            Article::An => "An",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Noun {
    pub sg: String,
    pub pl: String,
    pub art: Article,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verb {
    pub base: String,
    pub past: String,
    /// Marks verbs whose past equals the base form ("put").
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    pub invariant: bool,
}

/// Nouns and transitive verbs the synthetic patterns are built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub nouns: Vec<Noun>,
    pub verbs: Vec<Verb>,
}

impl Lexicon {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for n in &self.nouns {
            if n.sg.is_empty() || n.pl.is_empty() {
                return Err(Error::arg(alloc::format!("noun `{}` needs singular and plural forms", n.sg)));
            }
            if !seen.insert(n.sg.as_str()) {
                return Err(Error::arg(alloc::format!("duplicate noun `{}`", n.sg)));
            }
        }
        let mut seen = BTreeSet::new();
        for v in &self.verbs {
            if v.base.is_empty() || v.past.is_empty() {
                return Err(Error::arg(alloc::format!("verb `{}` needs base and past forms", v.base)));
            }
            if v.base == v.past && !v.invariant {
                return Err(Error::arg(alloc::format!(
                    "verb `{}` has identical base and past but is not flagged invariant",
                    v.base
                )));
            }
            if !seen.insert(v.base.as_str()) {
                return Err(Error::arg(alloc::format!("duplicate verb `{}`", v.base)));
            }
        }
        Ok(())
    }

    /// Keeps the first `nouns` nouns and `verbs` verbs.
    pub fn capped(&self, nouns: usize, verbs: usize) -> Lexicon {
        Lexicon {
            nouns: self.nouns.iter().take(nouns).cloned().collect(),
            verbs: self.verbs.iter().take(verbs).cloned().collect(),
        }
    }

    pub fn plural_of(&self, noun: &str) -> Option<&str> {
        self.nouns.iter().find(|n| n.sg == noun).map(|n| n.pl.as_str())
    }

    pub fn past_of(&self, verb: &str) -> Option<&str> {
        self.verbs.iter().find(|v| v.base == verb).map(|v| v.past.as_str())
    }
}
