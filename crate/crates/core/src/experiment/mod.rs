//! The human forced-choice experiment: item pool, sessions, exclusion and
//! analysis.

mod analysis;
mod pool;
mod session;

pub use analysis::{analyze, exclusion_pass, retained, session_summaries, AnalysisRow, SessionSummary, MAX_FILLER_ERROR_PCT};
pub use pool::{
    condition_pairs, design_conditions, sample_items, ControlItem, ControlSet, ItemId, ItemKind, ItemPool, TestItem,
};
pub use session::{
    Choice, Event, Experiment, ExperimentState, Judgment, JudgmentAck, NextItem, Phase, PresentedItem, Session,
    SessionId, Slot, PASS_THRESHOLD, TESTS_PER_SESSION,
};
