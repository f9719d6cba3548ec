mod common;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use npiprobe_core::contrast::{binomial_test, Alternative};
use npiprobe_core::experiment::{
    analyze, design_conditions, exclusion_pass, sample_items, session_summaries, Choice, ControlItem, ControlSet,
    Event, Experiment, ItemId, ItemPool, NextItem, Phase, Slot, TESTS_PER_SESSION,
};
use npiprobe_core::forge::{generate_base_patterns, Condition};
use npiprobe_core::Error;

fn controls() -> ControlSet {
    let item = |kind: &str, i: usize| ControlItem {
        good: format!("The {kind} {i} sentence reads well."),
        bad: format!("The {kind} {i} sentence well reads."),
    };
    ControlSet {
        fillers: (0..22).map(|i| item("filler", i)).collect(),
        qualification: (0..10).map(|i| item("check", i)).collect(),
    }
}

fn pool(n_patterns: usize, seed: u64) -> ItemPool {
    let lex = common::synthetic_lexicon(10, 5);
    let core = generate_base_patterns(&lex).unwrap();
    sample_items(&lex, &core, &design_conditions(), n_patterns, seed, &controls()).unwrap()
}

fn answer(slot: &Slot, correct: bool) -> Choice {
    // the primary side is `good` (controls) or `condition_a` (tests)
    if slot.swapped != correct {
        Choice::First
    } else {
        Choice::Second
    }
}

struct Sim {
    exp: Experiment,
    journal: Vec<(u64, Event)>,
    rng: ChaCha8Rng,
    ts: u64,
}

impl Sim {
    fn new(pool: ItemPool) -> Sim {
        Sim {
            exp: Experiment::new(pool).unwrap(),
            journal: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(99),
            ts: 0,
        }
    }

    fn commit(&mut self, events: Vec<Event>) {
        self.ts += 1;
        self.exp.apply_all(self.ts, &events).unwrap();
        self.journal.extend(events.into_iter().map(|e| (self.ts, e)));
    }

    fn start(&mut self, session: &str, qualification_correct: usize) -> Phase {
        let events = self.exp.create_session(session, &format!("p-{session}"), &mut self.rng).unwrap();
        self.commit(events);
        let slots = self.exp.session(session).unwrap().qualification.clone();
        let answers: Vec<Choice> = slots
            .iter()
            .enumerate()
            .map(|(i, s)| answer(s, i < qualification_correct))
            .collect();
        let events = self.exp.grade_qualification(session, &answers, &mut self.rng).unwrap();
        self.commit(events);
        self.exp.session(session).unwrap().phase
    }

    /// Answers every scheduled item; `filler_errors` fillers are answered
    /// wrongly and tests go to `condition_a` when `prefer_a` says so.
    fn run(&mut self, session: &str, filler_errors: usize, mut prefer_a: impl FnMut(&Slot, (Condition, Condition)) -> bool) {
        let mut wrong = 0;
        loop {
            let NextItem::Item(shown) = self.exp.next_item(session).unwrap() else { break };
            let slot = self.exp.session(session).unwrap().current().unwrap();
            assert_eq!(shown.item_id, slot.item);
            let correct = match slot.item {
                ItemId::Test(t) => {
                    let item = self.exp.test_item(t).unwrap();
                    let expected = if slot.swapped { (&item.text_b, &item.text_a) } else { (&item.text_a, &item.text_b) };
                    assert_eq!((&shown.first, &shown.second), expected);
                    prefer_a(&slot, (item.condition_a, item.condition_b))
                }
                _ => {
                    wrong += 1;
                    wrong > filler_errors
                }
            };
            let ack = self.exp.record_judgment(session, slot.item, answer(&slot, correct)).unwrap();
            self.commit(ack.events);
        }
    }
}

#[test]
fn pool_shape() {
    let p = pool(10, 1);
    assert_eq!(p.patterns.len(), 10);
    assert_eq!(p.tests.len(), 10 * 10 * 6);
    assert_eq!(p.condition_pairs().len(), 6);
    let mut seen = BTreeSet::new();
    for t in &p.tests {
        assert!(p.patterns.contains(&t.pattern_a) && p.patterns.contains(&t.pattern_b));
        assert!(seen.insert((t.pattern_a, t.pattern_b, t.condition_a, t.condition_b)));
        assert_eq!(t.condition_a.canonical_cmp(&t.condition_b), std::cmp::Ordering::Less);
    }
    assert_eq!(p, pool(10, 1));
    assert_ne!(p.tests, pool(10, 2).tests);
}

#[test]
fn fifty_patterns_give_2500_pattern_pairs() {
    let lex = common::synthetic_lexicon(10, 5);
    let core = generate_base_patterns(&lex).unwrap();
    let p = sample_items(&lex, &core, &design_conditions(), 50, 3, &controls()).unwrap();
    let pairs: BTreeSet<(u32, u32)> = p.tests.iter().map(|t| (t.pattern_a, t.pattern_b)).collect();
    assert_eq!(pairs.len(), 2500);
    assert_eq!(p.tests.len(), 2500 * 6);
}

#[test]
fn sessions_never_share_test_items() {
    let mut sim = Sim::new(pool(5, 4));
    // 150 tests: 9 full sessions and one partial of 6
    for i in 0..11 {
        assert_eq!(sim.start(&format!("s{i}"), 10), Phase::Main);
        sim.run(&format!("s{i}"), 0, |_, _| true);
    }
    let mut owner: BTreeMap<u32, String> = BTreeMap::new();
    for s in sim.exp.state().sessions.values() {
        assert_eq!(s.phase, Phase::Finished);
        let tests: Vec<u32> = s
            .schedule
            .iter()
            .filter_map(|slot| match slot.item {
                ItemId::Test(t) => Some(t),
                _ => None,
            })
            .collect();
        let fillers: BTreeSet<ItemId> = s.schedule.iter().map(|x| x.item).filter(|i| !matches!(i, ItemId::Test(_))).collect();
        assert_eq!(fillers.len(), 22);
        assert_eq!(s.schedule.len(), tests.len() + 22);
        assert_eq!(s.judgments.len(), s.schedule.len());
        for t in tests {
            assert!(owner.insert(t, s.id.clone()).is_none(), "test {t} served twice");
        }
    }
    assert_eq!(owner.len(), 150);
    let partial: Vec<_> = sim.exp.state().sessions.values().filter(|s| s.partial).map(|s| s.id.as_str()).collect();
    assert_eq!(partial, ["s10", "s9"]);
    let counts: Vec<usize> = ["s0", "s9", "s10"]
        .iter()
        .map(|id| {
            let s = sim.exp.session(id).unwrap();
            s.schedule.iter().filter(|x| matches!(x.item, ItemId::Test(_))).count()
        })
        .collect();
    assert_eq!(counts, [TESTS_PER_SESSION, 6, 0]);
}

#[test]
fn qualification_threshold() {
    let mut sim = Sim::new(pool(3, 5));
    assert_eq!(sim.start("a", 6), Phase::Failed);
    assert_eq!(sim.start("b", 7), Phase::Main);
    assert_eq!(sim.exp.session("a").unwrap().qualification_correct, Some(6));
    assert!(sim.exp.session("a").unwrap().schedule.is_empty());
    assert!(matches!(sim.exp.next_item("a"), Err(Error::State(_))));
    // failure frees the participant; an active session blocks a second one
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(sim.exp.create_session("a2", "p-a", &mut rng).is_ok());
    assert!(matches!(sim.exp.create_session("b2", "p-b", &mut rng), Err(Error::Conflict(_))));
    assert!(matches!(sim.exp.create_session("b", "p-z", &mut rng), Err(Error::Conflict(_))));
    assert!(sim.exp.grade_qualification("b", &[Choice::First; 10], &mut rng).is_err());
    assert!(matches!(sim.exp.grade_qualification("zz", &[], &mut rng), Err(Error::NotFound(_))));
}

#[test]
fn judgments_are_ordered_and_idempotent() {
    let mut sim = Sim::new(pool(3, 6));
    sim.start("s", 10);
    let schedule = sim.exp.session("s").unwrap().schedule.clone();
    assert!(matches!(
        sim.exp.record_judgment("s", schedule[1].item, Choice::First),
        Err(Error::Sequencing(_))
    ));
    let ack = sim.exp.record_judgment("s", schedule[0].item, Choice::Second).unwrap();
    assert_eq!((ack.answered, ack.total), (1, schedule.len()));
    sim.commit(ack.events);
    let again = sim.exp.record_judgment("s", schedule[0].item, Choice::Second).unwrap();
    assert!(again.events.is_empty());
    assert_eq!(again.answered, 1);
    assert!(matches!(
        sim.exp.record_judgment("s", schedule[0].item, Choice::First),
        Err(Error::Sequencing(_))
    ));
    // a duplicated journal line changes nothing
    let before = sim.exp.state().sessions["s"].clone();
    let (ts, dup) = sim.journal.last().cloned().unwrap();
    sim.exp.apply(ts + 5, &dup).unwrap();
    assert_eq!(sim.exp.state().sessions["s"], before);
}

#[test]
fn replay_rebuilds_state() {
    let p = pool(4, 8);
    let mut sim = Sim::new(p.clone());
    for (i, errors) in [0, 3, 9].into_iter().enumerate() {
        sim.start(&format!("s{i}"), 8);
        sim.run(&format!("s{i}"), errors, |slot, _| slot.swapped);
    }
    sim.start("half", 10);
    let lines: Vec<String> = sim.journal.iter().map(|(ts, e)| serde_json::to_string(&(ts, e)).unwrap()).collect();
    let mut replayed = Experiment::new(p.clone()).unwrap();
    for line in &lines {
        let (ts, e): (u64, Event) = serde_json::from_str(line).unwrap();
        replayed.apply(ts, &e).unwrap();
    }
    let mut a = sim.exp.state().clone();
    let mut b = replayed.state().clone();
    // `applied` counts duplicates too; compare the rest
    a.applied = 0;
    b.applied = 0;
    assert_eq!(a, b);
    let restored = Experiment::from_state(p, sim.exp.state().clone()).unwrap();
    assert_eq!(restored.state(), sim.exp.state());
}

#[test]
fn exclusion_at_thirty_percent() {
    let mut sim = Sim::new(pool(4, 9));
    for errors in 0..=22 {
        let id = format!("e{errors:02}");
        sim.start(&id, 10);
        sim.run(&id, errors, |_, _| true);
    }
    for s in session_summaries(&sim.exp) {
        let errors: usize = s.session[1..].parse().unwrap();
        assert_eq!(s.filler_errors, errors);
        assert_eq!(s.filler_total, 22);
        // 6/22 = 27.3% kept, 7/22 = 31.8% dropped
        assert_eq!(s.retained, errors <= 6, "{}", s.session);
    }
    assert_eq!(exclusion_pass(&sim.exp).len(), 7);
}

#[test]
fn planted_preference_is_recovered() {
    let p = pool(10, 11);
    let n_sessions = p.tests.len() / TESTS_PER_SESSION;
    let mut sim = Sim::new(p);
    let mut tally: BTreeMap<(Condition, Condition), (u64, u64)> = BTreeMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..n_sessions {
        let id = format!("s{i:03}");
        sim.start(&id, 10);
        // every fourth session is careless and must not count
        let careless = i % 4 == 3;
        let mut picks = Vec::new();
        sim.run(&id, if careless { 12 } else { 2 }, |_, pair| {
            let a = if careless { rng.random_bool(0.1) } else { rng.random_bool(0.75) };
            picks.push((pair, a));
            a
        });
        if !careless {
            for (pair, a) in picks {
                let e = tally.entry(pair).or_default();
                e.0 += u64::from(a);
                e.1 += 1;
            }
        }
    }
    let rows = analyze(&sim.exp, Alternative::TwoSided);
    assert_eq!(rows.len(), 6);
    let (mut k_all, mut n_all) = (0, 0);
    for r in &rows {
        let (k, n) = tally[&(r.condition_a, r.condition_b)];
        assert_eq!((r.k, r.n), (k, n));
        let expected = binomial_test(k, n).unwrap();
        assert_eq!(r.result.unwrap(), expected);
        assert!(expected.ci_low <= 0.75 && 0.75 <= expected.ci_high, "{r:?}");
        assert!(expected.p_value < 0.05);
        k_all += k;
        n_all += n;
    }
    let share = k_all as f64 / n_all as f64;
    assert!((share - 0.75).abs() < 0.05, "pooled share {share}");
}
