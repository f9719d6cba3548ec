//! The experiment as an event-sourced state machine.
//!
//! Commands validate against the current state and return events; nothing
//! changes until [`Experiment::apply`] runs. A persistence layer appends
//! the events durably between the two steps, and replaying a journal
//! through `apply` rebuilds the same state.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forge::Condition;

use super::pool::{ItemId, ItemKind, ItemPool};

/// Correct qualification answers needed to enter the main phase.
pub const PASS_THRESHOLD: u32 = 7;
/// Test items allocated to each qualified session.
pub const TESTS_PER_SESSION: usize = 16;

pub type SessionId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Qualification,
    Main,
    Finished,
    Failed,
}

impl Phase {
    pub fn is_active(self) -> bool {
        matches!(self, Phase::Qualification | Phase::Main)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    First,
    Second,
}

impl FromStr for Choice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Choice> {
        match s {
            "first" => Ok(Choice::First),
            "second" => Ok(Choice::Second),
            other => Err(Error::arg(alloc::format!("choice must be `first` or `second`, got `{other}`"))),
        }
    }
}

/// An item with its presentation order. Unswapped means the good control
/// sentence, or the test item's `condition_a` side, is shown first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub item: ItemId,
    pub swapped: bool,
}

impl Slot {
    /// Whether `choice` picked the unswapped-first side.
    pub fn picked_primary(&self, choice: Choice) -> bool {
        (choice == Choice::First) != self.swapped
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub item: ItemId,
    pub choice: Choice,
    pub swapped: bool,
    pub ts: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: SessionId,
    pub participant: String,
    pub phase: Phase,
    pub qualification: Vec<Slot>,
    pub qualification_correct: Option<u32>,
    pub schedule: Vec<Slot>,
    /// The pool ran out before a full allocation.
    pub partial: bool,
    pub judgments: Vec<Judgment>,
}

impl Session {
    pub fn judgment(&self, item: ItemId) -> Option<&Judgment> {
        self.judgments.iter().find(|j| j.item == item)
    }

    pub fn current(&self) -> Option<Slot> {
        self.schedule.get(self.judgments.len()).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    SessionCreated {
        session: SessionId,
        participant: String,
        qualification: Vec<Slot>,
    },
    QualificationGraded {
        session: SessionId,
        answers: Vec<Choice>,
        correct: u32,
        passed: bool,
    },
    ItemsAllocated {
        session: SessionId,
        /// Serving-order index of the first allocated test item.
        first_test: usize,
        tests: usize,
        schedule: Vec<Slot>,
        partial: bool,
    },
    JudgmentRecorded {
        session: SessionId,
        item: ItemId,
        choice: Choice,
    },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::SessionCreated { .. } => "session_created",
            Event::QualificationGraded { .. } => "qualification_graded",
            Event::ItemsAllocated { .. } => "items_allocated",
            Event::JudgmentRecorded { .. } => "judgment_recorded",
        }
    }

    pub fn session(&self) -> &str {
        match self {
            Event::SessionCreated { session, .. }
            | Event::QualificationGraded { session, .. }
            | Event::ItemsAllocated { session, .. }
            | Event::JudgmentRecorded { session, .. } => session,
        }
    }
}

/// What a participant sees: two texts in presentation order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentedItem {
    pub item_id: ItemId,
    pub first: String,
    pub second: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NextItem {
    Item(PresentedItem),
    Done,
}

/// Result of a judgment command: the events to persist (empty for an
/// idempotent repeat) and the progress they lead to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgmentAck {
    pub events: Vec<Event>,
    pub answered: usize,
    pub total: usize,
}

/// Everything except the pool; this is what snapshots hold.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentState {
    pub sessions: BTreeMap<SessionId, Session>,
    /// Participant → their qualification or main-phase session.
    pub active: BTreeMap<String, SessionId>,
    /// Serving-order index of the next unallocated test item.
    pub cursor: usize,
    /// Number of events applied.
    pub applied: u64,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pool: ItemPool,
    state: ExperimentState,
    test_position: Vec<usize>,
}

impl Experiment {
    pub fn new(pool: ItemPool) -> Result<Experiment> {
        Experiment::from_state(pool, ExperimentState::default())
    }

    pub fn from_state(pool: ItemPool, state: ExperimentState) -> Result<Experiment> {
        pool.validate()?;
        let mut test_position = alloc::vec![usize::MAX; pool.tests.len()];
        for (pos, t) in pool.tests.iter().enumerate() {
            let slot = test_position
                .get_mut(t.id as usize)
                .ok_or_else(|| Error::arg(alloc::format!("test id {} is not dense", t.id)))?;
            *slot = pos;
        }
        Ok(Experiment {
            pool,
            state,
            test_position,
        })
    }

    pub fn pool(&self) -> &ItemPool {
        &self.pool
    }

    pub fn state(&self) -> &ExperimentState {
        &self.state
    }

    pub fn session(&self, id: &str) -> Result<&Session> {
        self.state
            .sessions
            .get(id)
            .ok_or_else(|| Error::NotFound(alloc::format!("session `{id}`")))
    }

    pub fn test_item(&self, id: u32) -> Option<&super::pool::TestItem> {
        self.test_position.get(id as usize).and_then(|&p| self.pool.tests.get(p))
    }

    /// The condition a test choice selected.
    pub fn chosen_condition(&self, j: &Judgment) -> Option<Condition> {
        let ItemId::Test(id) = j.item else { return None };
        let t = self.test_item(id)?;
        let slot = Slot {
            item: j.item,
            swapped: j.swapped,
        };
        Some(if slot.picked_primary(j.choice) { t.condition_a } else { t.condition_b })
    }

    /// Whether a control choice picked the good sentence.
    pub fn control_correct(j: &Judgment) -> Option<bool> {
        match j.item.kind() {
            ItemKind::Test => None,
            _ => Some(
                Slot {
                    item: j.item,
                    swapped: j.swapped,
                }
                .picked_primary(j.choice),
            ),
        }
    }

    fn texts(&self, item: ItemId) -> Result<(&str, &str)> {
        let missing = || Error::NotFound(alloc::format!("item {item}"));
        Ok(match item {
            ItemId::Test(id) => {
                let t = self.test_item(id).ok_or_else(missing)?;
                (&t.text_a, &t.text_b)
            }
            ItemId::Filler(i) => {
                let c = self.pool.fillers.get(i as usize).ok_or_else(missing)?;
                (&c.good, &c.bad)
            }
            ItemId::Qualification(i) => {
                let c = self.pool.qualification.get(i as usize).ok_or_else(missing)?;
                (&c.good, &c.bad)
            }
        })
    }

    pub fn present(&self, slot: Slot) -> Result<PresentedItem> {
        let (a, b) = self.texts(slot.item)?;
        let (first, second) = if slot.swapped { (b, a) } else { (a, b) };
        Ok(PresentedItem {
            item_id: slot.item,
            first: first.into(),
            second: second.into(),
        })
    }

    pub fn qualification_items(&self, session: &str) -> Result<Vec<PresentedItem>> {
        self.session(session)?
            .qualification
            .iter()
            .map(|&s| self.present(s))
            .collect()
    }

    pub fn create_session(
        &self,
        session: &str,
        participant: &str,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Event>> {
        if session.is_empty() || participant.is_empty() {
            return Err(Error::arg("session and participant ids must be non-empty"));
        }
        if self.state.sessions.contains_key(session) {
            return Err(Error::Conflict(alloc::format!("session `{session}` already exists")));
        }
        if let Some(existing) = self.state.active.get(participant) {
            return Err(Error::Conflict(alloc::format!(
                "participant already has active session `{existing}`"
            )));
        }
        let mut qualification: Vec<Slot> = (0..self.pool.qualification.len() as u32)
            .map(|i| Slot {
                item: ItemId::Qualification(i),
                swapped: rng.random(),
            })
            .collect();
        qualification.shuffle(rng);
        Ok(alloc::vec![Event::SessionCreated {
            session: session.into(),
            participant: participant.into(),
            qualification,
        }])
    }

    pub fn grade_qualification(&self, session: &str, answers: &[Choice], rng: &mut dyn RngCore) -> Result<Vec<Event>> {
        let s = self.session(session)?;
        if s.phase != Phase::Qualification {
            return Err(Error::State(alloc::format!("session `{session}` is not in qualification")));
        }
        if answers.len() != s.qualification.len() {
            return Err(Error::arg(alloc::format!(
                "expected {} answers, got {}",
                s.qualification.len(),
                answers.len()
            )));
        }
        let correct = s
            .qualification
            .iter()
            .zip(answers)
            .filter(|(slot, &c)| slot.picked_primary(c))
            .count() as u32;
        let passed = correct >= PASS_THRESHOLD;
        let mut events = alloc::vec![Event::QualificationGraded {
            session: session.into(),
            answers: answers.to_vec(),
            correct,
            passed,
        }];
        if passed {
            let first_test = self.state.cursor;
            let tests = TESTS_PER_SESSION.min(self.pool.tests.len().saturating_sub(first_test));
            let mut schedule: Vec<Slot> = self.pool.tests[first_test..first_test + tests]
                .iter()
                .map(|t| ItemId::Test(t.id))
                .chain((0..self.pool.fillers.len() as u32).map(ItemId::Filler))
                .map(|item| Slot {
                    item,
                    swapped: rng.random(),
                })
                .collect();
            schedule.shuffle(rng);
            events.push(Event::ItemsAllocated {
                session: session.into(),
                first_test,
                tests,
                schedule,
                partial: tests < TESTS_PER_SESSION,
            });
        }
        Ok(events)
    }

    pub fn next_item(&self, session: &str) -> Result<NextItem> {
        let s = self.session(session)?;
        match s.phase {
            Phase::Finished => Ok(NextItem::Done),
            Phase::Main => match s.current() {
                Some(slot) => Ok(NextItem::Item(self.present(slot)?)),
                None => Ok(NextItem::Done),
            },
            other => Err(Error::State(alloc::format!("session `{session}` is in phase {other:?}"))),
        }
    }

    pub fn record_judgment(&self, session: &str, item: ItemId, choice: Choice) -> Result<JudgmentAck> {
        let s = self.session(session)?;
        let ack = |events| JudgmentAck {
            events,
            answered: s.judgments.len() + usize::from(!s.judgments.iter().any(|j| j.item == item)),
            total: s.schedule.len(),
        };
        if !matches!(s.phase, Phase::Main | Phase::Finished) {
            return Err(Error::State(alloc::format!("session `{session}` is in phase {:?}", s.phase)));
        }
        if let Some(prev) = s.judgment(item) {
            return if prev.choice == choice {
                Ok(ack(Vec::new()))
            } else {
                Err(Error::Sequencing(alloc::format!("item {item} already answered differently")))
            };
        }
        match s.current() {
            Some(slot) if slot.item == item => Ok(ack(alloc::vec![Event::JudgmentRecorded {
                session: session.into(),
                item,
                choice,
            }])),
            Some(slot) => Err(Error::Sequencing(alloc::format!(
                "expected item {}, got {item}",
                slot.item
            ))),
            None => Err(Error::Sequencing(alloc::format!("session `{session}` has no pending items"))),
        }
    }

    /// Applies one event. Judgments already present are ignored, so a
    /// journal with a repeated line replays to the same state.
    pub fn apply(&mut self, ts: u64, event: &Event) -> Result<()> {
        let missing = |id: &str| Error::NotFound(alloc::format!("session `{id}` in event"));
        match event {
            Event::SessionCreated {
                session,
                participant,
                qualification,
            } => {
                if self.state.sessions.contains_key(session) {
                    return Err(Error::Conflict(alloc::format!("session `{session}` created twice")));
                }
                self.state.sessions.insert(
                    session.clone(),
                    Session {
                        id: session.clone(),
                        participant: participant.clone(),
                        phase: Phase::Qualification,
                        qualification: qualification.clone(),
                        qualification_correct: None,
                        schedule: Vec::new(),
                        partial: false,
                        judgments: Vec::new(),
                    },
                );
                self.state.active.insert(participant.clone(), session.clone());
            }
            Event::QualificationGraded {
                session,
                correct,
                passed,
                ..
            } => {
                let s = self.state.sessions.get_mut(session).ok_or_else(|| missing(session))?;
                s.qualification_correct = Some(*correct);
                s.phase = if *passed { Phase::Main } else { Phase::Failed };
                if !passed {
                    self.state.active.remove(&s.participant);
                }
            }
            Event::ItemsAllocated {
                session,
                first_test,
                tests,
                schedule,
                partial,
            } => {
                let s = self.state.sessions.get_mut(session).ok_or_else(|| missing(session))?;
                s.schedule = schedule.clone();
                s.partial = *partial;
                self.state.cursor = self.state.cursor.max(first_test + tests);
                if s.schedule.is_empty() {
                    s.phase = Phase::Finished;
                    self.state.active.remove(&s.participant);
                }
            }
            Event::JudgmentRecorded { session, item, choice } => {
                let s = self.state.sessions.get_mut(session).ok_or_else(|| missing(session))?;
                if s.judgments.iter().any(|j| j.item == *item) {
                    return Ok(());
                }
                let slot = s
                    .schedule
                    .iter()
                    .find(|slot| slot.item == *item)
                    .copied()
                    .ok_or_else(|| Error::Sequencing(alloc::format!("item {item} not scheduled for `{session}`")))?;
                s.judgments.push(Judgment {
                    item: *item,
                    choice: *choice,
                    swapped: slot.swapped,
                    ts,
                });
                if s.judgments.len() == s.schedule.len() {
                    s.phase = Phase::Finished;
                    self.state.active.remove(&s.participant);
                }
            }
        }
        self.state.applied += 1;
        Ok(())
    }

    /// Applies every event with the same timestamp.
    pub fn apply_all(&mut self, ts: u64, events: &[Event]) -> Result<()> {
        events.iter().try_for_each(|e| self.apply(ts, e))
    }
}
