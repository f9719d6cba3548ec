//! The uniform model interface every metric and probe is written against.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::{TokenSequence, Tokenizer};

/// Tolerance for `Σ probs = 1`.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-5;
/// Tolerance for attention rows summing to one.
pub const ATTENTION_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Capabilities {
    pub masked_prediction: bool,
    pub causal_scoring: bool,
    pub attention_export: bool,
}

impl Capabilities {
    pub const ALL: Capabilities = Capabilities {
        masked_prediction: true,
        causal_scoring: true,
        attention_export: true,
    };

    pub fn names(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.masked_prediction {
            out.push("masked-prediction");
        }
        if self.causal_scoring {
            out.push("causal-scoring");
        }
        if self.attention_export {
            out.push("attention-export");
        }
        out
    }

    pub fn parse(names: &[String]) -> Result<Capabilities> {
        let mut caps = Capabilities::default();
        for name in names {
            match name.as_str() {
                "masked-prediction" => caps.masked_prediction = true,
                "causal-scoring" => caps.causal_scoring = true,
                "attention-export" => caps.attention_export = true,
                other => {
                    return Err(Error::capability(alloc::format!("unknown capability `{other}`")))
                }
            }
        }
        Ok(caps)
    }
}

/// Model metadata reported with every score table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub name: String,
    pub architecture: String,
    pub layers: usize,
    pub heads: usize,
    pub vocab_size: usize,
    pub capabilities: Capabilities,
    pub precision: String,
}

/// A probability for every vocabulary id.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub probs: Vec<f64>,
}

impl Distribution {
    pub fn uniform(n: usize) -> Self {
        Distribution {
            probs: alloc::vec![1.0 / n as f64; n],
        }
    }

    /// Numerically stable softmax.
    pub fn from_logits(logits: &[f32]) -> Self {
        let max = logits.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x as f64));
        let mut probs: Vec<f64> = logits.iter().map(|&x| libm::exp(x as f64 - max)).collect();
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        Distribution { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, id: u32) -> f64 {
        self.probs[id as usize]
    }

    /// 1-based rank of `id` in the vocabulary sorted by descending
    /// probability, ties broken by ascending id.
    pub fn rank(&self, id: u32) -> usize {
        let target = self.probs[id as usize];
        let above = self.probs.iter().filter(|&&p| p > target).count();
        let tied_before = self.probs[..id as usize].iter().filter(|&&p| p == target).count();
        above + tied_before + 1
    }

    pub fn is_normalized(&self) -> bool {
        let total: f64 = self.probs.iter().sum();
        self.probs.iter().all(|&p| p >= 0.0) && libm::fabs(total - 1.0) <= DISTRIBUTION_TOLERANCE
    }
}

/// Attention weights indexed `(layer, head, query, key)`, all 0-based here.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTensor {
    pub layers: usize,
    pub heads: usize,
    pub len: usize,
    pub weights: Vec<f64>,
}

impl AttentionTensor {
    pub fn zeros(layers: usize, heads: usize, len: usize) -> Self {
        AttentionTensor {
            layers,
            heads,
            len,
            weights: alloc::vec![0.0; layers * heads * len * len],
        }
    }

    fn offset(&self, layer: usize, head: usize, query: usize) -> usize {
        ((layer * self.heads + head) * self.len + query) * self.len
    }

    pub fn row(&self, layer: usize, head: usize, query: usize) -> &[f64] {
        let o = self.offset(layer, head, query);
        &self.weights[o..o + self.len]
    }

    pub fn row_mut(&mut self, layer: usize, head: usize, query: usize) -> &mut [f64] {
        let o = self.offset(layer, head, query);
        &mut self.weights[o..o + self.len]
    }

    pub fn get(&self, layer: usize, head: usize, query: usize, key: usize) -> f64 {
        self.row(layer, head, query)[key]
    }

    pub fn rows_normalized(&self) -> bool {
        self.weights.chunks(self.len.max(1)).all(|row| {
            let s: f64 = row.iter().sum();
            row.iter().all(|&w| (0.0..=1.0 + ATTENTION_TOLERANCE).contains(&w))
                && libm::fabs(s - 1.0) <= ATTENTION_TOLERANCE
        })
    }
}

/// A probability held as an exact ratio of counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// A loaded language model. Implementations are immutable after
/// construction, so every method is a pure function of its input.
pub trait Backend: Send + Sync {
    fn info(&self) -> &ModelInfo;

    fn tokenizer(&self) -> &Tokenizer;

    /// Distribution over the vocabulary at `mask_index`, which must hold
    /// the mask id.
    fn mlm_predict(&self, seq: &TokenSequence, mask_index: usize) -> Result<Distribution>;

    /// One next-token distribution per position; position `i` conditions
    /// only on tokens `0..=i`.
    fn clm_logits(&self, seq: &TokenSequence) -> Result<Vec<Distribution>>;

    fn attention_map(&self, seq: &TokenSequence) -> Result<AttentionTensor>;

    /// `ln p(seq[i] | seq[..i])` for `i` in `1..len`.
    fn next_token_log_probs(&self, seq: &TokenSequence) -> Result<Vec<f64>> {
        let dists = self.clm_logits(seq)?;
        Ok((1..seq.len())
            .map(|i| libm::log(dists[i - 1].prob(seq.ids[i])))
            .collect())
    }

    /// The same probabilities as exact ratios, for backends that define
    /// them by counting.
    fn exact_next_token_probs(&self, _seq: &TokenSequence) -> Result<Option<Vec<Ratio>>> {
        Ok(None)
    }
}

pub(crate) fn check_mask_position(
    tok: &Tokenizer,
    seq: &TokenSequence,
    mask_index: usize,
) -> Result<()> {
    let mask = tok.require_mask()?;
    match seq.ids.get(mask_index) {
        None => Err(Error::arg(alloc::format!(
            "mask index {mask_index} out of range for sequence of length {}",
            seq.len()
        ))),
        Some(&id) if id != mask => Err(Error::arg(alloc::format!(
            "position {mask_index} holds id {id}, not the mask id {mask}"
        ))),
        Some(_) => Ok(()),
    }
}

pub(crate) fn require(enabled: bool, what: &str) -> Result<()> {
    if enabled {
        Ok(())
    } else {
        Err(Error::capability(alloc::format!("backend lacks {what}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_ties_break_by_id() {
        let d = Distribution {
            probs: alloc::vec![0.2, 0.3, 0.2, 0.3],
        };
        assert_eq!(d.rank(1), 1);
        assert_eq!(d.rank(3), 2);
        assert_eq!(d.rank(0), 3);
        assert_eq!(d.rank(2), 4);
    }

    #[test]
    fn softmax_normalizes() {
        let d = Distribution::from_logits(&[1.0, 2.0, -30.0, 4.5]);
        assert!(d.is_normalized());
        assert!(d.prob(3) > d.prob(1));
    }
}
