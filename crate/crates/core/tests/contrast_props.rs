use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use npiprobe_core::contrast::{
    binomial_test, binomial_test_with, clopper_pearson, dominance, dominance_values, flip_probe, sweep_gap,
    sweep_vs_base, Alternative,
};
use npiprobe_core::forge::{Condition, ConditionKind};
use npiprobe_core::metrics::{MetricKind, ScoreHeader, ScoreRow, ScoreTable};
use npiprobe_core::{Capabilities, Error, ModelInfo};

fn table(hash: &str, metric: MetricKind, cond: Condition, values: &[f64]) -> ScoreTable {
    ScoreTable {
        header: ScoreHeader {
            dataset_hash: hash.into(),
            metric,
            backend: ModelInfo {
                name: "mock".into(),
                architecture: "mock".into(),
                layers: 1,
                heads: 1,
                vocab_size: 10,
                capabilities: Capabilities::ALL,
                precision: "f64".into(),
            },
        },
        rows: values
            .iter()
            .enumerate()
            .map(|(i, &value)| ScoreRow {
                id: i as u64,
                pattern_id: i as u64,
                condition: cond,
                value,
            })
            .collect(),
    }
}

fn better(metric: MetricKind, a: f64, b: f64) -> bool {
    if metric.higher_is_better() {
        a > b
    } else {
        a < b
    }
}

fn direct_pct(metric: MetricKind, a: &[f64], b: &[f64]) -> f64 {
    let wins = a.iter().zip(b).filter(|(x, y)| better(metric, **x, **y)).count();
    100.0 * wins as f64 / a.len() as f64
}

fn metric() -> impl Strategy<Value = MetricKind> {
    prop::sample::select(MetricKind::ALL.to_vec())
}

fn paired() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..40).prop_flat_map(|n| {
        // coarse values so ties happen
        let v = prop::collection::vec((0u32..8).prop_map(|x| x as f64 / 4.0), n);
        (v.clone(), v)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn antisymmetry_and_closure(m in metric(), (a, b) in paired()) {
        let ra: Vec<(u64, f64)> = a.iter().copied().enumerate().map(|(i, v)| (i as u64, v)).collect();
        let rb: Vec<(u64, f64)> = b.iter().copied().enumerate().map(|(i, v)| (i as u64, v)).collect();
        let ab = dominance_values(m, &ra, &rb).unwrap();
        let ba = dominance_values(m, &rb, &ra).unwrap();
        prop_assert_eq!(ab.a_better, ba.b_better);
        prop_assert_eq!(ab.b_better, ba.a_better);
        prop_assert_eq!(ab.ties, ba.ties);
        prop_assert_eq!(ab.a_better + ab.b_better + ab.ties, a.len());
        prop_assert!((ab.pct_a_better + ab.pct_b_better + ab.pct_tie - 100.0).abs() < 1e-9);
        prop_assert_eq!(ab.pct_a_better, direct_pct(m, &a, &b));
        let own = dominance_values(m, &ra, &ra).unwrap();
        prop_assert_eq!(own.pct_tie, 100.0);
    }

    #[test]
    fn row_order_does_not_matter(m in metric(), (a, b) in paired(), seed in any::<u64>()) {
        let ra: Vec<(u64, f64)> = a.iter().copied().enumerate().map(|(i, v)| (i as u64, v)).collect();
        let mut rb: Vec<(u64, f64)> = b.iter().copied().enumerate().map(|(i, v)| (i as u64, v)).collect();
        let before = dominance_values(m, &ra, &rb).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..rb.len()).rev() {
            rb.swap(i, rng.random_range(0..=i));
        }
        prop_assert_eq!(before, dominance_values(m, &ra, &rb).unwrap());
    }
}

#[test]
fn lineage_and_alignment_are_enforced() {
    let c = Condition::plain(ConditionKind::Few);
    let a = table("h1", MetricKind::BertProb, c, &[0.1, 0.2]);
    let b = table("h2", MetricKind::BertProb, c, &[0.1, 0.2]);
    assert!(matches!(dominance(&a, &b), Err(Error::Argument(_))));
    let short = table("h1", MetricKind::BertProb, c, &[0.1]);
    match dominance(&a, &short) {
        Err(Error::Alignment { only_in_a, only_in_b }) => {
            assert_eq!(only_in_a, [1]);
            assert!(only_in_b.is_empty());
        }
        other => panic!("{other:?}"),
    }
    let empty = table("h1", MetricKind::BertProb, c, &[]);
    assert!(matches!(dominance(&empty, &empty), Err(Error::Argument(_))));
    let rank = table("h1", MetricKind::BertRank, c, &[1.0, 2.0]);
    assert!(dominance(&a, &rank).is_err());
}

fn sweep_tables(kind: ConditionKind, seed: u64, numerals: &[u32], n: usize) -> BTreeMap<u32, ScoreTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    numerals
        .iter()
        .map(|&x| {
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
            (x, table("h", MetricKind::BertRank, Condition::numeric(kind, x), &values))
        })
        .collect()
}

fn values(t: &ScoreTable) -> Vec<f64> {
    t.rows.iter().map(|r| r.value).collect()
}

#[test]
fn sweep_points_are_direct_dominance() {
    let numerals: Vec<u32> = (2..=20).chain((30..=90).step_by(10)).collect();
    for seed in 0..20 {
        let tables = sweep_tables(ConditionKind::MoreThan, seed, &numerals, 25);
        let curve = sweep_vs_base(&tables, 2).unwrap();
        assert_eq!(curve.points.len(), numerals.len() - 1);
        for p in &curve.points {
            let expected = direct_pct(MetricKind::BertRank, &values(&tables[&2]), &values(&tables[&p.x]));
            assert_eq!(p.y, expected);
            assert_eq!(p.n, 25);
        }
    }
}

#[test]
fn gap_sweep_pools_by_brute_force() {
    for seed in 0..50 {
        let tables = sweep_tables(ConditionKind::AtLeast, seed, &[2, 3, 4], 11);
        let v = |n: u32| values(&tables[&n]);
        let wins = |lo: u32, hi: u32| {
            v(lo).iter().zip(v(hi)).filter(|(a, b)| better(MetricKind::BertRank, **a, *b)).count()
        };
        let curve = sweep_gap(&tables).unwrap();
        assert_eq!(curve.points.len(), 2);
        let g1 = &curve.points[0];
        assert_eq!((g1.x, g1.n), (1, 22));
        assert_eq!(g1.y, 100.0 * (wins(2, 3) + wins(3, 4)) as f64 / 22.0);
        let g2 = &curve.points[1];
        assert_eq!((g2.x, g2.n), (2, 11));
        assert_eq!(g2.y, 100.0 * wins(2, 4) as f64 / 11.0);
    }
}

#[test]
fn sweep_rejects_bad_families() {
    let between = table("h", MetricKind::BertRank, Condition::between(3, 5), &[1.0]);
    assert!(sweep_gap(&BTreeMap::from([(3, between.clone()), (4, between)])).is_err());
    let odd = sweep_tables(ConditionKind::MoreThan, 0, &[2, 25], 3);
    assert!(sweep_vs_base(&odd, 2).is_err());
    let ok = sweep_tables(ConditionKind::MoreThan, 0, &[2, 5], 3);
    assert!(sweep_vs_base(&ok, 3).is_err());
}

#[test]
fn flip_matches_hand_dominance() {
    for seed in 0..30 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tables = BTreeMap::new();
        let mut raw = BTreeMap::new();
        for kind in [ConditionKind::AtLeast, ConditionKind::MoreThan] {
            for n in [5, 70] {
                let v: Vec<f64> = (0..17).map(|_| rng.random_range(0..100) as f64 / 100.0).collect();
                let c = Condition::numeric(kind, n);
                tables.insert(c, table("h", MetricKind::BertProb, c, &v));
                raw.insert((kind, n), v);
            }
        }
        let r = flip_probe(&tables, ConditionKind::AtLeast, 5, ConditionKind::MoreThan, 70).unwrap();
        let fwd = direct_pct(MetricKind::BertProb, &raw[&(ConditionKind::AtLeast, 5)], &raw[&(ConditionKind::MoreThan, 70)]);
        let rev = direct_pct(MetricKind::BertProb, &raw[&(ConditionKind::MoreThan, 5)], &raw[&(ConditionKind::AtLeast, 70)]);
        assert_eq!((r.forward_pct, r.reversed_pct), (fwd, rev));
    }
    assert!(flip_probe(&BTreeMap::new(), ConditionKind::AtLeast, 5, ConditionKind::MoreThan, 70).is_err());
}

/// Probability of each success count by enumerating every outcome string.
fn enumerate(n: u32, p: f64) -> Vec<f64> {
    let mut by_k = vec![0.0; n as usize + 1];
    for mask in 0u32..(1 << n) {
        let k = mask.count_ones();
        by_k[k as usize] += p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
    }
    by_k
}

fn root(f: impl Fn(f64) -> f64, target: f64, increasing: bool) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-15 {
        let mid = (lo + hi) / 2.0;
        if (f(mid) < target) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / 2.0
}

#[test]
fn binomial_against_enumeration() {
    for n in 1..=12u32 {
        let half = enumerate(n, 0.5);
        for k in 0..=n {
            let r = binomial_test(k as u64, n as u64).unwrap();
            let observed = half[k as usize];
            let two: f64 = half.iter().filter(|&&d| d <= observed * (1.0 + 1e-7)).sum();
            assert!((r.p_value - two.min(1.0)).abs() < 1e-12, "n={n} k={k}");
            let greater: f64 = half[k as usize..].iter().sum();
            let g = binomial_test_with(k as u64, n as u64, Alternative::Greater).unwrap();
            assert!((g.p_value - greater.min(1.0)).abs() < 1e-12);
            let less: f64 = half[..=k as usize].iter().sum();
            let l = binomial_test_with(k as u64, n as u64, Alternative::Less).unwrap();
            assert!((l.p_value - less.min(1.0)).abs() < 1e-12);

            let low = if k == 0 {
                0.0
            } else {
                root(|p| enumerate(n, p)[k as usize..].iter().sum(), 0.025, true)
            };
            let high = if k == n {
                1.0
            } else {
                root(|p| enumerate(n, p)[..=k as usize].iter().sum(), 0.025, false)
            };
            assert!((r.ci_low - low).abs() < 1e-12, "n={n} k={k} {} vs {low}", r.ci_low);
            assert!((r.ci_high - high).abs() < 1e-12, "n={n} k={k} {} vs {high}", r.ci_high);
        }
    }
}

#[test]
fn nine_of_ten_is_22_over_1024() {
    assert!((binomial_test(9, 10).unwrap().p_value - 22.0 / 1024.0).abs() < 1e-12);
}

#[test]
fn interval_coverage_at_sixteen() {
    let n = 16u64;
    let intervals: Vec<(f64, f64)> = (0..=n).map(|k| clopper_pearson(k, n, 0.95)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = 10_000;
    let mut covered = 0;
    for _ in 0..draws {
        let p: f64 = rng.random_range(0.01..0.99);
        let k = (0..n).filter(|_| rng.random_bool(p)).count();
        let (lo, hi) = intervals[k];
        if lo <= p && p <= hi {
            covered += 1;
        }
    }
    assert!(covered as f64 / draws as f64 >= 0.94, "coverage {covered}/{draws}");
}

proptest! {
    #[test]
    fn interval_brackets_the_estimate(n in 1u64..400, k_frac in 0.0f64..=1.0) {
        let k = (k_frac * n as f64).round() as u64;
        let r = binomial_test(k, n).unwrap();
        prop_assert!(0.0 <= r.ci_low && r.ci_low <= r.p_hat && r.p_hat <= r.ci_high && r.ci_high <= 1.0);
        prop_assert!(r.p_value > 0.0 && r.p_value <= 1.0);
        let mirror = binomial_test(n - k, n).unwrap();
        prop_assert!((r.p_value - mirror.p_value).abs() < 1e-9);
    }
}
