use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::contrast::{binomial_test_with, Alternative, BinomialResult};
use crate::forge::Condition;

use super::pool::{ItemId, ItemKind};
use super::session::{Experiment, Phase, SessionId};

/// Maximum tolerated filler error rate, in percent.
pub const MAX_FILLER_ERROR_PCT: usize = 30;

/// Retained iff `errors / total ≤ 30%`, in exact integer arithmetic.
pub fn retained(filler_errors: usize, filler_total: usize) -> bool {
    filler_errors * 100 <= MAX_FILLER_ERROR_PCT * filler_total
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session: SessionId,
    pub filler_errors: usize,
    pub filler_total: usize,
    pub test_judgments: usize,
    pub retained: bool,
}

/// Finished sessions with their filler error counts.
pub fn session_summaries(exp: &Experiment) -> Vec<SessionSummary> {
    exp.state()
        .sessions
        .values()
        .filter(|s| s.phase == Phase::Finished)
        .map(|s| {
            let fillers: Vec<_> = s.judgments.iter().filter(|j| j.item.kind() == ItemKind::Filler).collect();
            let errors = fillers
                .iter()
                .filter(|j| Experiment::control_correct(j) == Some(false))
                .count();
            SessionSummary {
                session: s.id.clone(),
                filler_errors: errors,
                filler_total: fillers.len(),
                test_judgments: s.judgments.len() - fillers.len(),
                retained: retained(errors, fillers.len()),
            }
        })
        .collect()
}

pub fn exclusion_pass(exp: &Experiment) -> BTreeSet<SessionId> {
    session_summaries(exp)
        .into_iter()
        .filter(|s| s.retained)
        .map(|s| s.session)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    pub condition_a: Condition,
    pub condition_b: Condition,
    /// Choices of `condition_a`.
    pub k: u64,
    pub n: u64,
    /// `None` when no retained judgment exists for the pair.
    pub result: Option<BinomialResult>,
}

/// One row per condition pair of the pool, in canonical order.
pub fn analyze(exp: &Experiment, alternative: Alternative) -> Vec<AnalysisRow> {
    let keep = exclusion_pass(exp);
    let mut counts: BTreeMap<(Condition, Condition), (u64, u64)> =
        exp.pool().condition_pairs().into_iter().map(|p| (p, (0, 0))).collect();
    for id in &keep {
        let s = &exp.state().sessions[id];
        for j in &s.judgments {
            let ItemId::Test(t) = j.item else { continue };
            let (Some(item), Some(chosen)) = (exp.test_item(t), exp.chosen_condition(j)) else { continue };
            let e = counts.entry((item.condition_a, item.condition_b)).or_default();
            e.0 += u64::from(chosen == item.condition_a);
            e.1 += 1;
        }
    }
    let mut rows: Vec<AnalysisRow> = counts
        .into_iter()
        .map(|((a, b), (k, n))| AnalysisRow {
            condition_a: a,
            condition_b: b,
            k,
            n,
            result: binomial_test_with(k, n, alternative).ok(),
        })
        .collect();
    rows.sort_by(|x, y| {
        x.condition_a
            .canonical_cmp(&y.condition_a)
            .then(x.condition_b.canonical_cmp(&y.condition_b))
    });
    rows
}
