use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forge::ConditionKind;
use crate::metrics::{MetricKind, ScoreTable};

use super::dominance::{dominance, dominance_values, rows_of};

pub const DEFAULT_BASE: u32 = 2;

/// 2..=20 and the tens up to 90.
pub fn is_sweep_numeral(n: u32) -> bool {
    (2..=20).contains(&n) || (30..=90).contains(&n) && n % 10 == 0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    VsBase,
    Gap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub x: u32,
    pub y: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub kind: ConditionKind,
    pub mode: SweepMode,
    pub metric: MetricKind,
    pub base: Option<u32>,
    pub points: Vec<SweepPoint>,
}

fn family(tables: &BTreeMap<u32, ScoreTable>) -> Result<(ConditionKind, MetricKind)> {
    let mut kind = None;
    let mut metric = None;
    for (&n, t) in tables {
        if !is_sweep_numeral(n) {
            return Err(Error::arg(alloc::format!("numeral {n} is outside the sweep set")));
        }
        let c = t
            .condition()
            .ok_or_else(|| Error::arg(alloc::format!("table for numeral {n} is empty or mixes conditions")))?;
        if c.kind == ConditionKind::Between || !c.kind.is_numeric() {
            return Err(Error::arg(alloc::format!("{} cannot be swept", c.kind.slug())));
        }
        if c.n != Some(n) {
            return Err(Error::arg(alloc::format!("table keyed {n} holds {c}")));
        }
        if kind.replace(c.kind).is_some_and(|k| k != c.kind) {
            return Err(Error::arg("sweep tables mix quantifier kinds"));
        }
        if metric.replace(t.metric()).is_some_and(|m| m != t.metric()) {
            return Err(Error::arg("sweep tables mix metrics"));
        }
    }
    match (kind, metric) {
        (Some(k), Some(m)) => Ok((k, m)),
        _ => Err(Error::arg("no sweep tables")),
    }
}

/// `y(x)` = percent of patterns where the base numeral scores better than `x`.
pub fn sweep_vs_base(tables: &BTreeMap<u32, ScoreTable>, base: u32) -> Result<SweepCurve> {
    let (kind, metric) = family(tables)?;
    let base_table = tables
        .get(&base)
        .ok_or_else(|| Error::arg(alloc::format!("base numeral {base} has no table")))?;
    let mut points = Vec::new();
    for (&x, t) in tables.iter().filter(|(&x, _)| x != base) {
        let r = dominance(base_table, t)?;
        points.push(SweepPoint {
            x,
            y: r.pct_a_better,
            n: r.n_pairs,
        });
    }
    Ok(SweepCurve {
        kind,
        mode: SweepMode::VsBase,
        metric,
        base: Some(base),
        points,
    })
}

/// `y(g)` pools every pair `(n₁, n₂)` with `n₂ − n₁ = g`, one weight per
/// sentence pair: percent where the lower numeral scores better.
pub fn sweep_gap(tables: &BTreeMap<u32, ScoreTable>) -> Result<SweepCurve> {
    let (kind, metric) = family(tables)?;
    if tables.len() < 2 {
        return Err(Error::arg("a gap sweep needs at least two numerals"));
    }
    let mut pooled: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    let keys: Vec<u32> = tables.keys().copied().collect();
    for (i, &lo) in keys.iter().enumerate() {
        for &hi in &keys[i + 1..] {
            let (a, b) = (&tables[&lo], &tables[&hi]);
            if a.header.dataset_hash != b.header.dataset_hash {
                return Err(Error::arg("sweep tables come from different dataset lineages"));
            }
            let r = dominance_values(metric, &rows_of(a), &rows_of(b))?;
            let e = pooled.entry(hi - lo).or_default();
            e.0 += r.a_better;
            e.1 += r.n_pairs;
        }
    }
    let points = pooled
        .into_iter()
        .map(|(g, (wins, n))| SweepPoint {
            x: g,
            y: 100.0 * wins as f64 / n as f64,
            n,
        })
        .collect();
    Ok(SweepCurve {
        kind,
        mode: SweepMode::Gap,
        metric,
        base: None,
        points,
    })
}
