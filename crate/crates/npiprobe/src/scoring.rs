//! Parallel scoring over an immutable backend.

use rayon::prelude::*;

use npiprobe_core::forge::{realize_base, select_lowest, Lexicon, ProbeSentence, SentencePattern, Variant};
use npiprobe_core::metrics::{assemble_table, check_metric, perplexity, score_row, MetricKind, ScoreTable};
use npiprobe_core::Backend;

use crate::error::Result;

/// Same table as the serial scorer; rows are computed in parallel and
/// reduced by sentence id.
pub fn score_dataset(
    backend: &dyn Backend,
    dataset: &[ProbeSentence],
    dataset_hash: &str,
    metric: MetricKind,
) -> Result<ScoreTable> {
    check_metric(backend, metric)?;
    let rows: Vec<_> = dataset
        .par_iter()
        .filter(|s| s.variant == Variant::WithAny)
        .map(|s| score_row(backend, s, metric))
        .collect();
    Ok(assemble_table(backend, dataset_hash, metric, rows)?)
}

/// Per-pattern base-sentence perplexity, in pattern order.
pub fn pattern_perplexities(
    backend: &dyn Backend,
    lex: &Lexicon,
    patterns: &[SentencePattern],
) -> Result<Vec<(u32, f64)>> {
    let scored = patterns
        .par_iter()
        .map(|p| Ok((p.id, perplexity(backend, &realize_base(lex, p))?.ppl)))
        .collect::<npiprobe_core::Result<Vec<_>>>()?;
    Ok(scored)
}

/// The `k` lowest-perplexity patterns, sorted by id.
pub fn select_core(
    backend: &dyn Backend,
    lex: &Lexicon,
    patterns: &[SentencePattern],
    k: usize,
) -> Result<Vec<SentencePattern>> {
    let scored = pattern_perplexities(backend, lex, patterns)?;
    let keep = select_lowest(&scored, k)?;
    let mut by_id = patterns.to_vec();
    by_id.sort_unstable_by_key(|p| p.id);
    Ok(keep
        .into_iter()
        .filter_map(|id| by_id.binary_search_by_key(&id, |p| p.id).ok().map(|i| by_id[i]))
        .collect())
}
