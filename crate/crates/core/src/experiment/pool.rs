use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::forge::{realize_condition, Condition, ConditionKind, Lexicon, SentencePattern};

/// `t17`, `f3`, `q0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ItemId {
    Test(u32),
    Filler(u32),
    Qualification(u32),
}

impl ItemId {
    pub fn kind(self) -> ItemKind {
        match self {
            ItemId::Test(_) => ItemKind::Test,
            ItemId::Filler(_) => ItemKind::Filler,
            ItemId::Qualification(_) => ItemKind::Qualification,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Test,
    Filler,
    Qualification,
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ItemId::Test(i) => write!(f, "t{i}"),
            ItemId::Filler(i) => write!(f, "f{i}"),
            ItemId::Qualification(i) => write!(f, "q{i}"),
        }
    }
}

impl FromStr for ItemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<ItemId> {
        let bad = || Error::arg(alloc::format!("malformed item id `{s}`"));
        let mut chars = s.chars();
        let prefix = chars.next().ok_or_else(bad)?;
        let n: u32 = chars.as_str().parse().map_err(|_| bad())?;
        match prefix {
            't' => Ok(ItemId::Test(n)),
            'f' => Ok(ItemId::Filler(n)),
            'q' => Ok(ItemId::Qualification(n)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for ItemId {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ItemId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<ItemId, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One test pair: pattern `pattern_a` under `condition_a` against
/// `pattern_b` under `condition_b`, with `condition_a` first in canonical
/// order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestItem {
    pub id: u32,
    pub pattern_a: u32,
    pub pattern_b: u32,
    pub condition_a: Condition,
    pub condition_b: Condition,
    pub text_a: String,
    pub text_b: String,
}

/// A filler or qualification pair with a known better sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlItem {
    pub good: String,
    pub bad: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlSet {
    pub fillers: Vec<ControlItem>,
    pub qualification: Vec<ControlItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemPool {
    pub seed: u64,
    pub patterns: Vec<u32>,
    /// In serving order (shuffled under the seed).
    pub tests: Vec<TestItem>,
    pub fillers: Vec<ControlItem>,
    pub qualification: Vec<ControlItem>,
}

/// The four conditions of the human experiment.
pub fn design_conditions() -> [Condition; 4] {
    [
        Condition::numeric(ConditionKind::AtLeast, 5),
        Condition::numeric(ConditionKind::AtLeast, 70),
        Condition::numeric(ConditionKind::MoreThan, 5),
        Condition::numeric(ConditionKind::MoreThan, 70),
    ]
}

/// Unordered pairs of distinct conditions, each oriented canonically.
pub fn condition_pairs(conditions: &[Condition]) -> Vec<(Condition, Condition)> {
    let mut sorted = conditions.to_vec();
    sorted.sort_by(Condition::canonical_cmp);
    sorted.dedup();
    let mut out = Vec::new();
    for (i, &a) in sorted.iter().enumerate() {
        for &b in &sorted[i + 1..] {
            out.push((a, b));
        }
    }
    out
}

impl ItemPool {
    pub fn test(&self, id: u32) -> Option<&TestItem> {
        // ids are dense, but serving order is shuffled
        self.tests.iter().find(|t| t.id == id)
    }

    pub fn condition_pairs(&self) -> Vec<(Condition, Condition)> {
        let set: BTreeSet<(Condition, Condition)> =
            self.tests.iter().map(|t| (t.condition_a, t.condition_b)).collect();
        let mut v: Vec<_> = set.into_iter().collect();
        v.sort_by(|x, y| x.0.canonical_cmp(&y.0).then(x.1.canonical_cmp(&y.1)));
        v
    }

    pub fn validate(&self) -> Result<()> {
        if self.fillers.is_empty() || self.qualification.is_empty() {
            return Err(Error::arg("pool needs filler and qualification items"));
        }
        let mut ids = BTreeSet::new();
        let mut test_texts = BTreeSet::new();
        for t in &self.tests {
            if !ids.insert(t.id) {
                return Err(Error::arg(alloc::format!("duplicate test id {}", t.id)));
            }
            test_texts.insert(t.text_a.as_str());
            test_texts.insert(t.text_b.as_str());
        }
        for c in self.fillers.iter().chain(&self.qualification) {
            if c.good == c.bad {
                return Err(Error::arg(alloc::format!("control item has identical sides: {}", c.good)));
            }
            if test_texts.contains(c.good.as_str()) || test_texts.contains(c.bad.as_str()) {
                return Err(Error::arg(alloc::format!("control item overlaps a test item: {}", c.good)));
            }
        }
        Ok(())
    }
}

/// Samples `n_patterns` core patterns under `seed`, pairs every sampled
/// pattern with every sampled pattern (ordered, self-pairs included), and
/// crosses the pairs with every condition pair.
pub fn sample_items(
    lex: &Lexicon,
    core: &[SentencePattern],
    conditions: &[Condition],
    n_patterns: usize,
    seed: u64,
    controls: &ControlSet,
) -> Result<ItemPool> {
    if core.len() < n_patterns || n_patterns == 0 {
        return Err(Error::arg(alloc::format!(
            "cannot sample {n_patterns} patterns from a core of {}",
            core.len()
        )));
    }
    let pairs = condition_pairs(conditions);
    if pairs.is_empty() {
        return Err(Error::arg("the design needs at least two conditions"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sorted = core.to_vec();
    sorted.sort_by_key(|p| p.id);
    let mut picked: Vec<SentencePattern> = index::sample(&mut rng, sorted.len(), n_patterns)
        .into_iter()
        .map(|i| sorted[i])
        .collect();
    picked.sort_by_key(|p| p.id);

    let mut tests = Vec::with_capacity(n_patterns * n_patterns * pairs.len());
    for pa in &picked {
        for pb in &picked {
            for &(ca, cb) in &pairs {
                tests.push(TestItem {
                    id: tests.len() as u32,
                    pattern_a: pa.id,
                    pattern_b: pb.id,
                    condition_a: ca,
                    condition_b: cb,
                    text_a: realize_condition(lex, pa, &ca)?.text,
                    text_b: realize_condition(lex, pb, &cb)?.text,
                });
            }
        }
    }
    tests.shuffle(&mut rng);
    let pool = ItemPool {
        seed,
        patterns: picked.iter().map(|p| p.id).collect(),
        tests,
        fillers: controls.fillers.clone(),
        qualification: controls.qualification.clone(),
    };
    pool.validate()?;
    Ok(pool)
}
