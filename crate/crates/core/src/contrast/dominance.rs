use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forge::{Condition, ConditionKind};
use crate::metrics::{MetricKind, ScoreTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    ABetter,
    BBetter,
    Tie,
}

impl Outcome {
    /// Compares two values under the metric's direction; exact equality
    /// is a tie.
    pub fn of(metric: MetricKind, a: f64, b: f64) -> Outcome {
        if a == b {
            Outcome::Tie
        } else if (a > b) == metric.higher_is_better() {
            Outcome::ABetter
        } else {
            Outcome::BBetter
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceResult {
    pub condition_a: Option<Condition>,
    pub condition_b: Option<Condition>,
    pub metric: MetricKind,
    pub n_pairs: usize,
    pub a_better: usize,
    pub b_better: usize,
    pub ties: usize,
    pub pct_a_better: f64,
    pub pct_b_better: f64,
    pub pct_tie: f64,
}

fn pct(count: usize, n: usize) -> f64 {
    100.0 * count as f64 / n as f64
}

fn keyed(rows: &[(u64, f64)]) -> Result<BTreeMap<u64, f64>> {
    let mut out = BTreeMap::new();
    for &(pattern, value) in rows {
        if !value.is_finite() {
            return Err(Error::arg(alloc::format!("pattern {pattern}: non-finite score {value}")));
        }
        if out.insert(pattern, value).is_some() {
            return Err(Error::arg(alloc::format!("pattern id {pattern} occurs twice in one table")));
        }
    }
    Ok(out)
}

/// Pairs `(pattern_id, value)` rows by pattern id and counts outcomes.
pub fn dominance_values(metric: MetricKind, a: &[(u64, f64)], b: &[(u64, f64)]) -> Result<DominanceResult> {
    let a = keyed(a)?;
    let b = keyed(b)?;
    let ka: BTreeSet<u64> = a.keys().copied().collect();
    let kb: BTreeSet<u64> = b.keys().copied().collect();
    if ka != kb {
        return Err(Error::Alignment {
            only_in_a: ka.difference(&kb).copied().collect(),
            only_in_b: kb.difference(&ka).copied().collect(),
        });
    }
    if a.is_empty() {
        return Err(Error::arg("no paired rows to compare"));
    }
    let (mut a_better, mut b_better, mut ties) = (0, 0, 0);
    for (pattern, &va) in &a {
        match Outcome::of(metric, va, b[pattern]) {
            Outcome::ABetter => a_better += 1,
            Outcome::BBetter => b_better += 1,
            Outcome::Tie => ties += 1,
        }
    }
    let n = a.len();
    Ok(DominanceResult {
        condition_a: None,
        condition_b: None,
        metric,
        n_pairs: n,
        a_better,
        b_better,
        ties,
        pct_a_better: pct(a_better, n),
        pct_b_better: pct(b_better, n),
        pct_tie: pct(ties, n),
    })
}

pub(crate) fn rows_of(t: &ScoreTable) -> Vec<(u64, f64)> {
    t.rows.iter().map(|r| (r.pattern_id, r.value)).collect()
}

/// Percent of shared patterns where `a` scores better than `b`.
pub fn dominance(a: &ScoreTable, b: &ScoreTable) -> Result<DominanceResult> {
    if a.metric() != b.metric() {
        return Err(Error::arg(alloc::format!(
            "metric mismatch: {} vs {}",
            a.metric().name(),
            b.metric().name()
        )));
    }
    if a.header.dataset_hash != b.header.dataset_hash {
        return Err(Error::arg(alloc::format!(
            "tables come from different dataset lineages ({} vs {})",
            a.header.dataset_hash,
            b.header.dataset_hash
        )));
    }
    let mut r = dominance_values(a.metric(), &rows_of(a), &rows_of(b))?;
    r.condition_a = a.condition();
    r.condition_b = b.condition();
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipReport {
    pub quant_a: ConditionKind,
    pub n_a: u32,
    pub quant_b: ConditionKind,
    pub n_b: u32,
    pub metric: MetricKind,
    /// `A(n_a)` better than `B(n_b)`.
    pub forward_pct: f64,
    /// `B(n_a)` better than `A(n_b)`.
    pub reversed_pct: f64,
}

/// Forward and reversed dominance for a pair of quantifiers with their
/// numerals exchanged.
pub fn flip_probe(
    tables: &BTreeMap<Condition, ScoreTable>,
    quant_a: ConditionKind,
    n_a: u32,
    quant_b: ConditionKind,
    n_b: u32,
) -> Result<FlipReport> {
    let get = |kind: ConditionKind, n: u32| {
        let c = Condition::new(kind, Some(n), None)?;
        tables
            .get(&c)
            .ok_or_else(|| Error::NotFound(alloc::format!("no score table for {c}")))
    };
    let forward = dominance(get(quant_a, n_a)?, get(quant_b, n_b)?)?;
    let reversed = dominance(get(quant_b, n_a)?, get(quant_a, n_b)?)?;
    Ok(FlipReport {
        quant_a,
        n_a,
        quant_b,
        n_b,
        metric: forward.metric,
        forward_pct: forward.pct_a_better,
        reversed_pct: reversed.pct_a_better,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_toy() {
        let a = [(0, 0.9), (1, 0.8), (2, 0.1), (3, 0.7)];
        let b = [(0, 0.5), (1, 0.5), (2, 0.5), (3, 0.5)];
        let r = dominance_values(MetricKind::BertProb, &a, &b).unwrap();
        assert_eq!(r.pct_a_better, 75.0);
        assert_eq!(r.pct_b_better, 25.0);
        let rank = dominance_values(MetricKind::BertRank, &a, &b).unwrap();
        assert_eq!(rank.pct_a_better, 25.0);
    }

    #[test]
    fn self_comparison_is_all_ties() {
        let a = [(0, 0.9), (1, 0.8)];
        let r = dominance_values(MetricKind::GptPplDiff, &a, &a).unwrap();
        assert_eq!((r.pct_a_better, r.pct_tie), (0.0, 100.0));
    }

    #[test]
    fn misaligned_ids_are_listed() {
        let a = [(0, 1.0), (1, 1.0), (4, 1.0)];
        let b = [(0, 1.0), (2, 1.0)];
        match dominance_values(MetricKind::BertProb, &a, &b) {
            Err(Error::Alignment { only_in_a, only_in_b }) => {
                assert_eq!(only_in_a, [1, 4]);
                assert_eq!(only_in_b, [2]);
            }
            other => panic!("{other:?}"),
        }
    }
}
