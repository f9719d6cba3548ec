use alloc::string::String;
use alloc::vec::Vec;

use super::ops::{add_in_place, gelu_erf, gelu_tanh, layer_norm, linear, softmax_in_place, transpose};
use super::{Architecture, TensorNames, TensorStore};
use crate::backend::{
    check_mask_position, require, AttentionTensor, Backend, Capabilities, Distribution, ModelInfo,
};
use crate::error::{Error, Result};
use crate::tokenizer::{TokenSequence, Tokenizer};

/// Everything but the weights needed to assemble a model.
#[derive(Debug, Clone)]
pub struct TransformerSpec {
    pub name: String,
    pub architecture: Architecture,
    pub layers: usize,
    pub heads: usize,
    pub layer_norm_eps: Option<f32>,
    pub names: TensorNames,
    /// Capabilities the manifest claims; `None` derives them from the weights.
    pub claimed: Option<Capabilities>,
}

struct Norm {
    gamma: Vec<f32>,
    beta: Vec<f32>,
}

struct Dense {
    weight: Vec<f32>,
    bias: Vec<f32>,
    out: usize,
}

impl Dense {
    fn apply(&self, x: &[f32], rows: usize) -> Vec<f32> {
        linear(x, rows, &self.weight, Some(&self.bias), self.out)
    }
}

struct Layer {
    query: Dense,
    key: Dense,
    value: Dense,
    attention_out: Dense,
    attention_norm: Norm,
    ffn_in: Dense,
    ffn_out: Dense,
    ffn_norm: Norm,
}

struct MlmHead {
    transform: Dense,
    norm: Norm,
    decoder: Vec<f32>,
    bias: Vec<f32>,
}

pub struct TransformerBackend {
    info: ModelInfo,
    tokenizer: Tokenizer,
    architecture: Architecture,
    hidden: usize,
    eps: f32,
    word_embeddings: Vec<f32>,
    position_embeddings: Vec<f32>,
    max_positions: usize,
    token_type: Option<Vec<f32>>,
    embeddings_norm: Option<Norm>,
    final_norm: Option<Norm>,
    layers: Vec<Layer>,
    mlm: Option<MlmHead>,
}

struct Loader<'a> {
    store: &'a mut TensorStore,
    names: &'a TensorNames,
    missing: Vec<String>,
    bad_shape: Vec<String>,
}

impl Loader<'_> {
    fn name(&self, param: &str, layer: Option<usize>) -> String {
        self.names.resolve(param, layer)
    }

    fn present(&self, param: &str, layer: Option<usize>) -> bool {
        self.store.contains_key(&self.name(param, layer))
    }

    /// Takes a tensor, recording it as missing or misshapen instead of failing
    /// early so the final error lists every problem.
    fn take(&mut self, param: &str, layer: Option<usize>, shape: &[usize]) -> Vec<f32> {
        let name = self.name(param, layer);
        match self.store.remove(&name) {
            None => {
                self.missing.push(name);
                Vec::new()
            }
            Some(t) if t.shape != shape => {
                self.bad_shape
                    .push(alloc::format!("{name}: expected {shape:?}, found {:?}", t.shape));
                Vec::new()
            }
            Some(t) => t.data,
        }
    }

    fn norm(&mut self, param: &str, layer: Option<usize>, d: usize) -> Norm {
        Norm {
            gamma: self.take(&alloc::format!("{param}.weight"), layer, &[d]),
            beta: self.take(&alloc::format!("{param}.bias"), layer, &[d]),
        }
    }

    /// Linear layer stored `[out, in]`.
    fn dense(&mut self, param: &str, layer: Option<usize>, out: usize, inp: usize) -> Dense {
        Dense {
            weight: self.take(&alloc::format!("{param}.weight"), layer, &[out, inp]),
            bias: self.take(&alloc::format!("{param}.bias"), layer, &[out]),
            out,
        }
    }

    /// Conv1D layer stored `[in, out]`, transposed to `[out, in]`.
    fn conv1d(&mut self, param: &str, layer: Option<usize>, inp: usize, out: usize) -> Dense {
        let w = self.take(&alloc::format!("{param}.weight"), layer, &[inp, out]);
        let weight = if w.is_empty() { w } else { transpose(&w, inp, out) };
        Dense {
            weight,
            bias: self.take(&alloc::format!("{param}.bias"), layer, &[out]),
            out,
        }
    }
}

fn split_dense(fused: Dense, d: usize) -> (Dense, Dense, Dense) {
    let part = |k: usize| Dense {
        weight: fused.weight.get(k * d * d..(k + 1) * d * d).map(<[f32]>::to_vec).unwrap_or_default(),
        bias: fused.bias.get(k * d..(k + 1) * d).map(<[f32]>::to_vec).unwrap_or_default(),
        out: d,
    };
    (part(0), part(1), part(2))
}

impl TransformerBackend {
    pub fn from_store(spec: TransformerSpec, mut store: TensorStore, tokenizer: Tokenizer) -> Result<Self> {
        let names = spec.names.clone();
        let emb_name = names.resolve("word_embeddings", None);
        let pos_name = names.resolve("position_embeddings", None);
        let (vocab, hidden) = match store.get(&emb_name).map(|t| t.shape.clone()) {
            Some(s) if s.len() == 2 => (s[0], s[1]),
            Some(s) => return Err(Error::Load(alloc::format!("{emb_name} has shape {s:?}, expected 2-D"))),
            None => return Err(Error::MissingTensors { missing: alloc::vec![emb_name] }),
        };
        let max_positions = store.get(&pos_name).map(|t| t.shape[0]).unwrap_or(0);
        if vocab != tokenizer.vocab_size() {
            return Err(Error::Load(alloc::format!(
                "embedding rows ({vocab}) differ from tokenizer vocabulary ({})",
                tokenizer.vocab_size()
            )));
        }
        if spec.heads == 0 || hidden % spec.heads != 0 {
            return Err(Error::Load(alloc::format!(
                "hidden size {hidden} not divisible into {} heads",
                spec.heads
            )));
        }
        let intermediate = {
            let probe = match spec.architecture {
                Architecture::Bert => names.resolve("ffn_in.weight", Some(0)),
                Architecture::Gpt2 => names.resolve("ffn_in.weight", Some(0)),
            };
            match (store.get(&probe), spec.architecture) {
                (Some(t), Architecture::Bert) => t.shape[0],
                (Some(t), Architecture::Gpt2) => t.shape.get(1).copied().unwrap_or(0),
                (None, _) => 4 * hidden,
            }
        };
        let d = hidden;

        let mut ld = Loader {
            store: &mut store,
            names: &names,
            missing: Vec::new(),
            bad_shape: Vec::new(),
        };
        let word_embeddings = ld.take("word_embeddings", None, &[vocab, d]);
        let position_embeddings = ld.take("position_embeddings", None, &[max_positions, d]);
        let mut layers = Vec::with_capacity(spec.layers);
        let (token_type, embeddings_norm, final_norm, mlm) = match spec.architecture {
            Architecture::Bert => {
                let types = ld
                    .store
                    .get(&ld.name("token_type_embeddings", None))
                    .map(|t| t.shape[0])
                    .unwrap_or(2);
                let token_type = ld.take("token_type_embeddings", None, &[types, d]);
                let embeddings_norm = ld.norm("embeddings_norm", None, d);
                for l in 0..spec.layers {
                    let l = Some(l);
                    layers.push(Layer {
                        query: ld.dense("query", l, d, d),
                        key: ld.dense("key", l, d, d),
                        value: ld.dense("value", l, d, d),
                        attention_out: ld.dense("attention_out", l, d, d),
                        attention_norm: ld.norm("attention_norm", l, d),
                        ffn_in: ld.dense("ffn_in", l, intermediate, d),
                        ffn_out: ld.dense("ffn_out", l, d, intermediate),
                        ffn_norm: ld.norm("ffn_norm", l, d),
                    });
                }
                let head_present = ld.present("mlm_transform.weight", None);
                let mlm = if head_present {
                    let transform = ld.dense("mlm_transform", None, d, d);
                    let norm = ld.norm("mlm_norm", None, d);
                    let decoder = if ld.present("mlm_decoder.weight", None) {
                        ld.take("mlm_decoder.weight", None, &[vocab, d])
                    } else {
                        word_embeddings.clone()
                    };
                    let bias = ld.take("mlm_decoder.bias", None, &[vocab]);
                    Some(MlmHead {
                        transform,
                        norm,
                        decoder,
                        bias,
                    })
                } else {
                    None
                };
                (Some(token_type), Some(embeddings_norm), None, mlm)
            }
            Architecture::Gpt2 => {
                for l in 0..spec.layers {
                    let l = Some(l);
                    let attention_norm = ld.norm("attention_norm", l, d);
                    let (query, key, value) = split_dense(ld.conv1d("qkv", l, d, 3 * d), d);
                    layers.push(Layer {
                        query,
                        key,
                        value,
                        attention_out: ld.conv1d("attention_out", l, d, d),
                        attention_norm,
                        ffn_in: ld.conv1d("ffn_in", l, d, intermediate),
                        ffn_out: ld.conv1d("ffn_out", l, intermediate, d),
                        ffn_norm: ld.norm("ffn_norm", l, d),
                    });
                }
                let final_norm = ld.norm("final_norm", None, d);
                (None, None, Some(final_norm), None)
            }
        };
        if !ld.missing.is_empty() {
            return Err(Error::MissingTensors { missing: ld.missing });
        }
        if !ld.bad_shape.is_empty() {
            return Err(Error::Load(ld.bad_shape.join("; ")));
        }

        let derived = Capabilities {
            masked_prediction: mlm.is_some() && tokenizer.specials().mask.is_some(),
            causal_scoring: spec.architecture == Architecture::Gpt2,
            attention_export: true,
        };
        let capabilities = match spec.claimed {
            None => derived,
            Some(claimed) => {
                let lacking: Vec<&str> = claimed
                    .names()
                    .into_iter()
                    .filter(|n| !derived.names().contains(n))
                    .collect();
                if !lacking.is_empty() {
                    return Err(Error::capability(alloc::format!(
                        "manifest claims [{}] but the weights/tokenizer do not support it",
                        lacking.join(", ")
                    )));
                }
                claimed
            }
        };
        let eps = spec.layer_norm_eps.unwrap_or(match spec.architecture {
            Architecture::Bert => 1e-12,
            Architecture::Gpt2 => 1e-5,
        });
        Ok(TransformerBackend {
            info: ModelInfo {
                name: spec.name,
                architecture: String::from(match spec.architecture {
                    Architecture::Bert => "bert",
                    Architecture::Gpt2 => "gpt2",
                }),
                layers: spec.layers,
                heads: spec.heads,
                vocab_size: vocab,
                capabilities,
                precision: String::from(crate::SCORING_PRECISION),
            },
            tokenizer,
            architecture: spec.architecture,
            hidden,
            eps,
            word_embeddings,
            position_embeddings,
            max_positions,
            token_type,
            embeddings_norm,
            final_norm,
            layers,
            mlm,
        })
    }

    fn check_ids(&self, seq: &TokenSequence) -> Result<()> {
        if seq.is_empty() {
            return Err(Error::arg("empty sequence"));
        }
        if seq.len() > self.max_positions {
            return Err(Error::arg(alloc::format!(
                "sequence of {} tokens exceeds the {} positions of the model",
                seq.len(),
                self.max_positions
            )));
        }
        if let Some(&bad) = seq.ids.iter().find(|&&id| id as usize >= self.info.vocab_size) {
            return Err(Error::arg(alloc::format!("token id {bad} outside the vocabulary")));
        }
        Ok(())
    }

    /// Final hidden states `[n, d]` and, when requested, attention `[L, H, n, n]`.
    fn encode(&self, ids: &[u32], keep_attention: bool) -> (Vec<f32>, Vec<f32>) {
        let n = ids.len();
        let d = self.hidden;
        let mut x = Vec::with_capacity(n * d);
        for (pos, &id) in ids.iter().enumerate() {
            let w = &self.word_embeddings[id as usize * d..(id as usize + 1) * d];
            let p = &self.position_embeddings[pos * d..(pos + 1) * d];
            for k in 0..d {
                let mut v = w[k] + p[k];
                if let Some(tt) = &self.token_type {
                    v += tt[k];
                }
                x.push(v);
            }
        }
        if let Some(norm) = &self.embeddings_norm {
            layer_norm(&mut x, d, &norm.gamma, &norm.beta, self.eps);
        }
        let mut attention = Vec::new();
        let causal = self.architecture == Architecture::Gpt2;
        for layer in &self.layers {
            match self.architecture {
                Architecture::Bert => {
                    let ctx = self.self_attention(layer, &x, n, causal, keep_attention.then_some(&mut attention));
                    let mut a = layer.attention_out.apply(&ctx, n);
                    add_in_place(&mut a, &x);
                    layer_norm(&mut a, d, &layer.attention_norm.gamma, &layer.attention_norm.beta, self.eps);
                    let mut h = layer.ffn_in.apply(&a, n);
                    gelu_erf(&mut h);
                    let mut out = layer.ffn_out.apply(&h, n);
                    add_in_place(&mut out, &a);
                    layer_norm(&mut out, d, &layer.ffn_norm.gamma, &layer.ffn_norm.beta, self.eps);
                    x = out;
                }
                Architecture::Gpt2 => {
                    let mut h = x.clone();
                    layer_norm(&mut h, d, &layer.attention_norm.gamma, &layer.attention_norm.beta, self.eps);
                    let ctx = self.self_attention(layer, &h, n, causal, keep_attention.then_some(&mut attention));
                    let a = layer.attention_out.apply(&ctx, n);
                    add_in_place(&mut x, &a);
                    let mut h = x.clone();
                    layer_norm(&mut h, d, &layer.ffn_norm.gamma, &layer.ffn_norm.beta, self.eps);
                    let mut f = layer.ffn_in.apply(&h, n);
                    gelu_tanh(&mut f);
                    let f = layer.ffn_out.apply(&f, n);
                    add_in_place(&mut x, &f);
                }
            }
        }
        if let Some(norm) = &self.final_norm {
            layer_norm(&mut x, d, &norm.gamma, &norm.beta, self.eps);
        }
        (x, attention)
    }

    fn self_attention(
        &self,
        layer: &Layer,
        x: &[f32],
        n: usize,
        causal: bool,
        mut keep: Option<&mut Vec<f32>>,
    ) -> Vec<f32> {
        let d = self.hidden;
        let heads = self.info.heads;
        let dh = d / heads;
        let scale = 1.0 / libm::sqrtf(dh as f32);
        let q = layer.query.apply(x, n);
        let k = layer.key.apply(x, n);
        let v = layer.value.apply(x, n);
        let mut ctx = alloc::vec![0f32; n * d];
        let mut scores = alloc::vec![0f32; n];
        for h in 0..heads {
            let cols = h * dh..(h + 1) * dh;
            for i in 0..n {
                let visible = if causal { i + 1 } else { n };
                let qi = &q[i * d..(i + 1) * d][cols.clone()];
                for j in 0..visible {
                    let kj = &k[j * d..(j + 1) * d][cols.clone()];
                    scores[j] = super::ops::dot(qi, kj) * scale;
                }
                softmax_in_place(&mut scores[..visible]);
                for s in &mut scores[visible..] {
                    *s = 0.0;
                }
                let out = &mut ctx[i * d + h * dh..i * d + (h + 1) * dh];
                for j in 0..visible {
                    let vj = &v[j * d + h * dh..j * d + (h + 1) * dh];
                    for (o, val) in out.iter_mut().zip(vj) {
                        *o += scores[j] * val;
                    }
                }
                if let Some(store) = keep.as_deref_mut() {
                    store.extend_from_slice(&scores);
                }
            }
        }
        ctx
    }

    fn lm_logits(&self, hidden: &[f32]) -> Vec<f32> {
        linear(hidden, 1, &self.word_embeddings, None, self.info.vocab_size)
    }
}

impl Backend for TransformerBackend {
    fn info(&self) -> &ModelInfo {
        &self.info
    }

    fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    fn mlm_predict(&self, seq: &TokenSequence, mask_index: usize) -> Result<Distribution> {
        require(self.info.capabilities.masked_prediction, "masked-prediction")?;
        check_mask_position(&self.tokenizer, seq, mask_index)?;
        self.check_ids(seq)?;
        let head = self.mlm.as_ref().ok_or_else(|| Error::capability("no masked-LM head"))?;
        let d = self.hidden;
        let (x, _) = self.encode(&seq.ids, false);
        let h = &x[mask_index * d..(mask_index + 1) * d];
        let mut t = head.transform.apply(h, 1);
        gelu_erf(&mut t);
        layer_norm(&mut t, d, &head.norm.gamma, &head.norm.beta, self.eps);
        let logits = linear(&t, 1, &head.decoder, Some(&head.bias), self.info.vocab_size);
        Ok(Distribution::from_logits(&logits))
    }

    fn clm_logits(&self, seq: &TokenSequence) -> Result<Vec<Distribution>> {
        require(self.info.capabilities.causal_scoring, "causal-scoring")?;
        self.check_ids(seq)?;
        let d = self.hidden;
        let (x, _) = self.encode(&seq.ids, false);
        Ok(x.chunks(d).map(|h| Distribution::from_logits(&self.lm_logits(h))).collect())
    }

    fn attention_map(&self, seq: &TokenSequence) -> Result<AttentionTensor> {
        require(self.info.capabilities.attention_export, "attention-export")?;
        self.check_ids(seq)?;
        let (_, att) = self.encode(&seq.ids, true);
        Ok(AttentionTensor {
            layers: self.info.layers,
            heads: self.info.heads,
            len: seq.len(),
            weights: att.into_iter().map(f64::from).collect(),
        })
    }

    fn next_token_log_probs(&self, seq: &TokenSequence) -> Result<Vec<f64>> {
        require(self.info.capabilities.causal_scoring, "causal-scoring")?;
        self.check_ids(seq)?;
        let d = self.hidden;
        let (x, _) = self.encode(&seq.ids, false);
        Ok((1..seq.len())
            .map(|i| {
                let logits = self.lm_logits(&x[(i - 1) * d..i * d]);
                let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64));
                let lse = max + libm::log(logits.iter().map(|&v| libm::exp(v as f64 - max)).sum::<f64>());
                logits[seq.ids[i] as usize] as f64 - lse
            })
            .collect())
    }
}
