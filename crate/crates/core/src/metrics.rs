//! The two acceptability measurements: cloze probability/rank of the
//! target at its masked position, and the change in token-normalized
//! perplexity caused by inserting it.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::backend::{require, Backend, ModelInfo, Ratio};
use crate::error::{Error, Result};
use crate::forge::{Condition, ProbeSentence, Variant};

/// Default cloze target.
pub const DEFAULT_TARGET: &str = "any";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClozeScore {
    pub prob: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PplScore {
    pub ppl: f64,
    pub scored_token_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PplDiffScore {
    pub with_any: PplScore,
    pub without_any: PplScore,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "bert-prob")]
    BertProb,
    #[serde(rename = "bert-rank")]
    BertRank,
    #[serde(rename = "gpt-ppl-diff")]
    GptPplDiff,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::BertProb, MetricKind::BertRank, MetricKind::GptPplDiff];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::BertProb => "bert-prob",
            MetricKind::BertRank => "bert-rank",
            MetricKind::GptPplDiff => "gpt-ppl-diff",
        }
    }

    pub fn from_name(s: &str) -> Option<MetricKind> {
        MetricKind::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, MetricKind::BertProb)
    }

    pub fn is_integer(self) -> bool {
        matches!(self, MetricKind::BertRank)
    }

    fn check(self, backend: &dyn Backend) -> Result<()> {
        let caps = backend.info().capabilities;
        match self {
            MetricKind::BertProb | MetricKind::BertRank => require(caps.masked_prediction, "masked-prediction"),
            MetricKind::GptPplDiff => require(caps.causal_scoring, "causal-scoring"),
        }
    }
}

/// Masks the target at the sentence's any span and reads its probability
/// and rank from the masked-LM distribution.
pub fn cloze_score(backend: &dyn Backend, s: &ProbeSentence, target: &str) -> Result<ClozeScore> {
    require(backend.info().capabilities.masked_prediction, "masked-prediction")?;
    if s.variant != Variant::WithAny {
        return Err(Error::arg(alloc::format!("sentence {} is not a with-any variant", s.id)));
    }
    let tok = backend.tokenizer();
    let mask = tok.require_mask()?;
    if tok.encode(target, false)?.len() != 1 {
        return Err(Error::UnsupportedTarget(target.into()));
    }
    let seq = tok.encode(&s.text, true)?;
    let positions = seq.positions_within(&s.any_span());
    let [pos] = positions[..] else {
        return Err(Error::UnsupportedTarget(target.into()));
    };
    let id = seq.ids[pos];
    let dist = backend.mlm_predict(&seq.with_replaced(pos, mask), pos)?;
    Ok(ClozeScore {
        prob: dist.prob(id),
        rank: dist.rank(id),
    })
}

/// `exp(−mean ln p)` over every real token, each conditioned on the start
/// marker and its prefix.
pub fn perplexity(backend: &dyn Backend, text: &str) -> Result<PplScore> {
    require(backend.info().capabilities.causal_scoring, "causal-scoring")?;
    let tok = backend.tokenizer();
    let start = tok
        .specials()
        .start
        .ok_or_else(|| Error::capability("tokenizer has no sequence-start marker"))?;
    let seq = tok.encode(text, false)?.with_prefix(start);
    if let Some(ratios) = backend.exact_next_token_probs(&seq)? {
        return Ok(PplScore {
            ppl: ppl_from_ratios(&ratios),
            scored_token_count: ratios.len(),
        });
    }
    let log_probs = backend.next_token_log_probs(&seq)?;
    Ok(PplScore {
        ppl: ppl_from_log_probs(&log_probs),
        scored_token_count: log_probs.len(),
    })
}

/// `exp(−(1/n)·Σ lp)`.
pub fn ppl_from_log_probs(log_probs: &[f64]) -> f64 {
    libm::exp(-log_probs.iter().sum::<f64>() / log_probs.len() as f64)
}

/// Perplexity from exact probabilities. A constant probability `a/b`
/// gives `b/a` in a single rounding.
pub fn ppl_from_ratios(ratios: &[Ratio]) -> f64 {
    match ratios.first() {
        Some(&r) if ratios.iter().all(|&x| x == r) => r.den as f64 / r.num as f64,
        _ => {
            let nll: f64 = ratios
                .iter()
                .map(|r| libm::log(r.den as f64) - libm::log(r.num as f64))
                .sum();
            libm::exp(nll / ratios.len() as f64)
        }
    }
}

pub fn ppl_diff(backend: &dyn Backend, s: &ProbeSentence) -> Result<PplDiffScore> {
    let without = s.without_any_text()?;
    let with_any = perplexity(backend, &s.text)?;
    let without_any = perplexity(backend, &without)?;
    Ok(PplDiffScore {
        with_any,
        without_any,
        delta: with_any.ppl - without_any.ppl,
    })
}

/// The value a metric assigns to one sentence.
pub fn score_sentence(backend: &dyn Backend, s: &ProbeSentence, metric: MetricKind) -> Result<f64> {
    let value = match metric {
        MetricKind::BertProb => cloze_score(backend, s, DEFAULT_TARGET)?.prob,
        MetricKind::BertRank => cloze_score(backend, s, DEFAULT_TARGET)?.rank as f64,
        MetricKind::GptPplDiff => ppl_diff(backend, s)?.delta,
    };
    Ok(value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreHeader {
    pub dataset_hash: String,
    pub metric: MetricKind,
    pub backend: ModelInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub id: u64,
    pub pattern_id: u64,
    pub condition: Condition,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub header: ScoreHeader,
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn metric(&self) -> MetricKind {
        self.header.metric
    }

    /// The condition shared by every row, if the table is non-empty and
    /// uniform.
    pub fn condition(&self) -> Option<Condition> {
        let first = self.rows.first()?.condition;
        self.rows.iter().all(|r| r.condition == first).then_some(first)
    }
}

/// Scores one sentence and tags failures with the sentence id.
pub fn score_row(backend: &dyn Backend, s: &ProbeSentence, metric: MetricKind) -> Result<ScoreRow> {
    let value = score_sentence(backend, s, metric).map_err(|e| Error::Sentence {
        id: s.id,
        source: Box::new(e),
    })?;
    Ok(ScoreRow {
        id: s.id,
        pattern_id: s.pattern_id,
        condition: s.condition,
        value,
    })
}

/// Assembles rows into a table sorted by sentence id. Any row error aborts.
pub fn assemble_table(
    backend: &dyn Backend,
    dataset_hash: &str,
    metric: MetricKind,
    rows: impl IntoIterator<Item = Result<ScoreRow>>,
) -> Result<ScoreTable> {
    let mut rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.id);
    Ok(ScoreTable {
        header: ScoreHeader {
            dataset_hash: dataset_hash.into(),
            metric,
            backend: backend.info().clone(),
        },
        rows,
    })
}

/// One row per with-any sentence, serially.
pub fn score_dataset(
    backend: &dyn Backend,
    dataset: &[ProbeSentence],
    dataset_hash: &str,
    metric: MetricKind,
) -> Result<ScoreTable> {
    metric.check(backend)?;
    let rows = dataset
        .iter()
        .filter(|s| s.variant == Variant::WithAny)
        .map(|s| score_row(backend, s, metric));
    assemble_table(backend, dataset_hash, metric, rows)
}

/// Capability check for a metric, exposed for callers that score in
/// parallel.
pub fn check_metric(backend: &dyn Backend, metric: MetricKind) -> Result<()> {
    metric.check(backend)
}
