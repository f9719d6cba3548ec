use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The polarity contexts a probe sentence can be realized in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConditionKind {
    Aff,
    Neg,
    Some,
    No,
    Many,
    Few,
    MoreThan,
    FewerThan,
    AtLeast,
    AtMost,
    Exactly,
    Between,
    SomePron,
    NoPron,
}

impl ConditionKind {
    pub const ALL: [ConditionKind; 14] = [
        ConditionKind::Aff,
        ConditionKind::Neg,
        ConditionKind::Some,
        ConditionKind::No,
        ConditionKind::Many,
        ConditionKind::Few,
        ConditionKind::MoreThan,
        ConditionKind::FewerThan,
        ConditionKind::AtLeast,
        ConditionKind::AtMost,
        ConditionKind::Exactly,
        ConditionKind::Between,
        ConditionKind::SomePron,
        ConditionKind::NoPron,
    ];

    /// Kinds that carry a numeral.
    pub fn is_numeric(self) -> bool {
        matches!(
            self,
            ConditionKind::MoreThan
                | ConditionKind::FewerThan
                | ConditionKind::AtLeast
                | ConditionKind::AtMost
                | ConditionKind::Exactly
                | ConditionKind::Between
        )
    }

    pub fn is_pronoun(self) -> bool {
        matches!(self, ConditionKind::SomePron | ConditionKind::NoPron)
    }

    /// Kebab-case name used on the command line.
    pub fn slug(self) -> &'static str {
        match self {
            ConditionKind::Aff => "aff",
            ConditionKind::Neg => "neg",
            ConditionKind::Some => "some",
            ConditionKind::No => "no",
            ConditionKind::Many => "many",
            ConditionKind::Few => "few",
            ConditionKind::MoreThan => "more-than",
            ConditionKind::FewerThan => "fewer-than",
            ConditionKind::AtLeast => "at-least",
            ConditionKind::AtMost => "at-most",
            ConditionKind::Exactly => "exactly",
            ConditionKind::Between => "between",
            ConditionKind::SomePron => "some-pron",
            ConditionKind::NoPron => "no-pron",
        }
    }

    pub fn from_slug(s: &str) -> Option<ConditionKind> {
        ConditionKind::ALL.into_iter().find(|k| k.slug() == s)
    }

    /// Sentence-initial words of the quantifier, if any.
    pub(crate) fn quantifier_words(self) -> Option<&'static str> {
        Some(match self {
            ConditionKind::Some => "Some",
            ConditionKind::No => "No",
            ConditionKind::Many => "Many",
            ConditionKind::Few => "Few",
            ConditionKind::MoreThan => "More than",
            ConditionKind::FewerThan => "Fewer than",
            ConditionKind::AtLeast => "At least",
            ConditionKind::AtMost => "At most",
            ConditionKind::Exactly => "Exactly",
            ConditionKind::Between => "Between",
            _ => return None,
        })
    }
}

/// A context kind plus its numeral parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Condition {
    pub kind: ConditionKind,
    pub n: Option<u32>,
    pub n2: Option<u32>,
}

impl Condition {
    pub fn new(kind: ConditionKind, n: Option<u32>, n2: Option<u32>) -> Result<Condition> {
        let c = Condition { kind, n, n2 };
        c.validate()?;
        Ok(c)
    }

    /// A condition without numerals.
    pub fn plain(kind: ConditionKind) -> Condition {
        Condition { kind, n: None, n2: None }
    }

    pub fn numeric(kind: ConditionKind, n: u32) -> Condition {
        Condition {
            kind,
            n: Some(n),
            n2: None,
        }
    }

    pub fn between(n: u32, n2: u32) -> Condition {
        Condition {
            kind: ConditionKind::Between,
            n: Some(n),
            n2: Some(n2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let wants_n = self.kind.is_numeric();
        let wants_n2 = self.kind == ConditionKind::Between;
        if self.n.is_some() != wants_n {
            return Err(Error::arg(alloc::format!("{self}: numeral presence does not match the kind")));
        }
        if self.n2.is_some() != wants_n2 {
            return Err(Error::arg(alloc::format!("{self}: second numeral only allowed for BETWEEN")));
        }
        if let (Some(a), Some(b)) = (self.n, self.n2) {
            if b <= a {
                return Err(Error::arg(alloc::format!("{self}: second numeral must exceed the first")));
            }
        }
        Ok(())
    }

    /// Ordering by (kind name, numeral, second numeral), used to orient
    /// condition pairs in the human-experiment analysis.
    pub fn canonical_cmp(&self, other: &Condition) -> Ordering {
        self.kind
            .slug()
            .cmp(other.kind.slug())
            .then(self.n.cmp(&other.n))
            .then(self.n2.cmp(&other.n2))
    }

    /// The same kind with a different first numeral.
    pub fn with_numeral(&self, n: u32) -> Condition {
        Condition { n: Some(n), ..*self }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.slug())?;
        if let Some(n) = self.n {
            write!(f, ":{n}")?;
        }
        if let Some(n2) = self.n2 {
            write!(f, ":{n2}")?;
        }
        Ok(())
    }
}

impl FromStr for Condition {
    type Err = Error;

    /// Parses `neg`, `at-least:5`, `between:5:10` (case-insensitive,
    /// `_` accepted for `-`).
    fn from_str(s: &str) -> Result<Condition> {
        let norm: String = s.trim().to_ascii_lowercase().replace('_', "-");
        let mut parts = norm.split(':');
        let kind_part = parts.next().unwrap_or_default();
        let kind = ConditionKind::from_slug(kind_part)
            .ok_or_else(|| Error::arg(alloc::format!("unknown condition `{kind_part}`")))?;
        let nums: Vec<u32> = parts
            .map(|p| p.parse().map_err(|_| Error::arg(alloc::format!("bad numeral `{p}` in `{s}`"))))
            .collect::<Result<_>>()?;
        if nums.len() > 2 {
            return Err(Error::arg(alloc::format!("too many numerals in `{s}`")));
        }
        Condition::new(kind, nums.first().copied(), nums.get(1).copied())
    }
}
