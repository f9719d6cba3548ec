//! A deterministic backend whose every output is computable by hand.
//!
//! * masked prediction: the target token gets the probability of the first
//!   cue rule whose cue phrase occurs in the sequence (else `default_prob`,
//!   else the distribution is uniform); the remaining mass is spread evenly
//!   over the other ids.
//! * causal scoring: a bigram count table with add-one smoothing,
//!   `p(next | prev) = (c(prev, next) + 1) / (c(prev) + |V|)`.
//! * attention: a tensor declared per sequence length, uniform rows for
//!   undeclared lengths.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::backend::{
    check_mask_position, require, AttentionTensor, Backend, Capabilities, Distribution, ModelInfo, Ratio,
};
use crate::error::{Error, Result};
use crate::tokenizer::{TokenSequence, Tokenizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueRule {
    /// Phrases (encoded with the backend tokenizer) that trigger the rule.
    pub cues: Vec<String>,
    pub prob: f64,
}

/// Attention fixture: sequence length → `[layer][head][query][key]`.
pub type AttentionFixture = BTreeMap<String, Vec<Vec<Vec<Vec<f64>>>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockConfig {
    #[serde(default = "default_target")]
    pub target: String,
    #[serde(default)]
    pub cue_rules: Vec<CueRule>,
    #[serde(default)]
    pub default_prob: Option<f64>,
    /// `prev → next → count`.
    #[serde(default)]
    pub bigram_table: BTreeMap<String, BTreeMap<String, u64>>,
    #[serde(default)]
    pub attention_fixture: AttentionFixture,
}

impl Default for MockConfig {
    fn default() -> Self {
        MockConfig {
            target: default_target(),
            cue_rules: Vec::new(),
            default_prob: None,
            bigram_table: BTreeMap::new(),
            attention_fixture: AttentionFixture::new(),
        }
    }
}

fn default_target() -> String {
    "any".to_string()
}

struct EncodedRule {
    phrases: Vec<Vec<u32>>,
    prob: f64,
}

pub struct MockBackend {
    info: ModelInfo,
    tokenizer: Tokenizer,
    target: Option<u32>,
    rules: Vec<EncodedRule>,
    default_prob: Option<f64>,
    counts: BTreeMap<u32, BTreeMap<u32, u64>>,
    row_totals: BTreeMap<u32, u64>,
    attention: BTreeMap<usize, AttentionTensor>,
}

impl MockBackend {
    pub fn new(
        name: &str,
        layers: usize,
        heads: usize,
        tokenizer: Tokenizer,
        config: &MockConfig,
    ) -> Result<MockBackend> {
        let v = tokenizer.vocab_size();
        let prob_ok = |p: f64| p > 0.0 && p < 1.0;
        let target = tokenizer.token_id(&config.target);
        let mut rules = Vec::new();
        for rule in &config.cue_rules {
            if !prob_ok(rule.prob) {
                return Err(Error::arg(alloc::format!("cue rule probability {} not in (0,1)", rule.prob)));
            }
            let mut phrases = Vec::new();
            for cue in &rule.cues {
                phrases.push(tokenizer.encode(cue, false)?.ids);
            }
            rules.push(EncodedRule {
                phrases,
                prob: rule.prob,
            });
        }
        if let Some(p) = config.default_prob {
            if !prob_ok(p) {
                return Err(Error::arg(alloc::format!("default probability {p} not in (0,1)")));
            }
        }
        if (!rules.is_empty() || config.default_prob.is_some()) && target.is_none() {
            return Err(Error::arg(alloc::format!(
                "target `{}` is not in the vocabulary",
                config.target
            )));
        }

        let mut counts: BTreeMap<u32, BTreeMap<u32, u64>> = BTreeMap::new();
        for (prev, row) in &config.bigram_table {
            let p = lookup(&tokenizer, prev)?;
            for (next, &c) in row {
                let n = lookup(&tokenizer, next)?;
                *counts.entry(p).or_default().entry(n).or_default() += c;
            }
        }
        let row_totals = counts
            .iter()
            .map(|(&p, row)| (p, row.values().sum()))
            .collect();

        let mut attention = BTreeMap::new();
        for (len_key, tensor) in &config.attention_fixture {
            let len: usize = len_key
                .parse()
                .map_err(|_| Error::arg(alloc::format!("attention fixture key `{len_key}` is not a length")))?;
            attention.insert(len, flatten_fixture(tensor, layers, heads, len)?);
        }

        let caps = Capabilities {
            masked_prediction: tokenizer.specials().mask.is_some(),
            causal_scoring: true,
            attention_export: true,
        };
        Ok(MockBackend {
            info: ModelInfo {
                name: name.to_string(),
                architecture: "mock".to_string(),
                layers,
                heads,
                vocab_size: v,
                capabilities: caps,
                precision: crate::SCORING_PRECISION.to_string(),
            },
            tokenizer,
            target,
            rules,
            default_prob: config.default_prob,
            counts,
            row_totals,
            attention,
        })
    }

    /// Restricts the advertised capabilities.
    pub fn with_capabilities(mut self, caps: Capabilities) -> Self {
        self.info.capabilities = caps;
        self
    }

    fn bigram_ratio(&self, prev: u32, next: u32) -> Ratio {
        let c = self
            .counts
            .get(&prev)
            .and_then(|row| row.get(&next))
            .copied()
            .unwrap_or(0);
        let total = self.row_totals.get(&prev).copied().unwrap_or(0);
        Ratio {
            num: c + 1,
            den: total + self.info.vocab_size as u64,
        }
    }

    fn bigram_prob(&self, prev: u32, next: u32) -> f64 {
        self.bigram_ratio(prev, next).to_f64()
    }

    fn cue_prob(&self, seq: &TokenSequence) -> Option<f64> {
        self.rules
            .iter()
            .find(|rule| rule.phrases.iter().any(|ph| contains_run(&seq.ids, ph)))
            .map(|rule| rule.prob)
            .or(self.default_prob)
    }
}

fn lookup(tok: &Tokenizer, token: &str) -> Result<u32> {
    tok.token_id(token)
        .ok_or_else(|| Error::arg(alloc::format!("bigram token `{token}` is not in the vocabulary")))
}

fn contains_run(haystack: &[u32], needle: &[u32]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

fn flatten_fixture(
    tensor: &[Vec<Vec<Vec<f64>>>],
    layers: usize,
    heads: usize,
    len: usize,
) -> Result<AttentionTensor> {
    let bad = |what: &str| Error::arg(alloc::format!("attention fixture for length {len}: {what}"));
    if tensor.len() != layers || tensor.iter().any(|l| l.len() != heads) {
        return Err(bad("layer/head dimensions do not match the model"));
    }
    let mut out = AttentionTensor::zeros(layers, heads, len);
    for (l, layer) in tensor.iter().enumerate() {
        for (h, head) in layer.iter().enumerate() {
            if head.len() != len {
                return Err(bad("wrong number of query rows"));
            }
            for (q, row) in head.iter().enumerate() {
                if row.len() != len {
                    return Err(bad("wrong number of keys"));
                }
                out.row_mut(l, h, q).copy_from_slice(row);
            }
        }
    }
    if !out.rows_normalized() {
        return Err(bad("rows must be non-negative and sum to 1"));
    }
    Ok(out)
}

impl Backend for MockBackend {
    fn info(&self) -> &ModelInfo {
        &self.info
    }

    fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    fn mlm_predict(&self, seq: &TokenSequence, mask_index: usize) -> Result<Distribution> {
        require(self.info.capabilities.masked_prediction, "masked-prediction")?;
        check_mask_position(&self.tokenizer, seq, mask_index)?;
        let v = self.info.vocab_size;
        match (self.cue_prob(seq), self.target) {
            (Some(p), Some(target)) => {
                let rest = (1.0 - p) / (v - 1) as f64;
                let mut probs = alloc::vec![rest; v];
                probs[target as usize] = p;
                Ok(Distribution { probs })
            }
            _ => Ok(Distribution::uniform(v)),
        }
    }

    fn clm_logits(&self, seq: &TokenSequence) -> Result<Vec<Distribution>> {
        require(self.info.capabilities.causal_scoring, "causal-scoring")?;
        if seq.is_empty() {
            return Err(Error::arg("empty sequence"));
        }
        let v = self.info.vocab_size as u32;
        Ok(seq
            .ids
            .iter()
            .map(|&prev| Distribution {
                probs: (0..v).map(|next| self.bigram_prob(prev, next)).collect(),
            })
            .collect())
    }

    fn attention_map(&self, seq: &TokenSequence) -> Result<AttentionTensor> {
        require(self.info.capabilities.attention_export, "attention-export")?;
        let n = seq.len();
        if n == 0 {
            return Err(Error::arg("empty sequence"));
        }
        if let Some(t) = self.attention.get(&n) {
            return Ok(t.clone());
        }
        let mut t = AttentionTensor::zeros(self.info.layers, self.info.heads, n);
        t.weights.fill(1.0 / n as f64);
        Ok(t)
    }

    fn next_token_log_probs(&self, seq: &TokenSequence) -> Result<Vec<f64>> {
        require(self.info.capabilities.causal_scoring, "causal-scoring")?;
        if seq.is_empty() {
            return Err(Error::arg("empty sequence"));
        }
        Ok(seq
            .ids
            .windows(2)
            .map(|w| libm::log(self.bigram_prob(w[0], w[1])))
            .collect())
    }

    fn exact_next_token_probs(&self, seq: &TokenSequence) -> Result<Option<Vec<Ratio>>> {
        require(self.info.capabilities.causal_scoring, "causal-scoring")?;
        Ok(Some(seq.ids.windows(2).map(|w| self.bigram_ratio(w[0], w[1])).collect()))
    }
}
