//! BERT-style (masked) and GPT-2-style (causal) transformer inference over
//! named `f32` tensors.
//!
//! Weight containers are read by the std companion crate; this module only
//! sees a [`TensorStore`]. Which tensor plays which role is resolved through
//! [`TensorNames`]: a table of templates (with a `{layer}` placeholder) that
//! defaults to the Hugging Face checkpoint layout and can be overridden per
//! manifest.

mod model;
mod ops;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use model::{TransformerBackend, TransformerSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Tensor> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Load(alloc::format!(
                "tensor shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }
}

pub type TensorStore = BTreeMap<String, Tensor>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Bert,
    Gpt2,
}

/// Logical parameter name → tensor-name template.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorNames {
    templates: BTreeMap<String, String>,
    prefix: String,
}

const BERT_NAMES: &[(&str, &str)] = &[
    ("word_embeddings", "bert.embeddings.word_embeddings.weight"),
    ("position_embeddings", "bert.embeddings.position_embeddings.weight"),
    ("token_type_embeddings", "bert.embeddings.token_type_embeddings.weight"),
    ("embeddings_norm.weight", "bert.embeddings.LayerNorm.weight"),
    ("embeddings_norm.bias", "bert.embeddings.LayerNorm.bias"),
    ("query.weight", "bert.encoder.layer.{layer}.attention.self.query.weight"),
    ("query.bias", "bert.encoder.layer.{layer}.attention.self.query.bias"),
    ("key.weight", "bert.encoder.layer.{layer}.attention.self.key.weight"),
    ("key.bias", "bert.encoder.layer.{layer}.attention.self.key.bias"),
    ("value.weight", "bert.encoder.layer.{layer}.attention.self.value.weight"),
    ("value.bias", "bert.encoder.layer.{layer}.attention.self.value.bias"),
    ("attention_out.weight", "bert.encoder.layer.{layer}.attention.output.dense.weight"),
    ("attention_out.bias", "bert.encoder.layer.{layer}.attention.output.dense.bias"),
    ("attention_norm.weight", "bert.encoder.layer.{layer}.attention.output.LayerNorm.weight"),
    ("attention_norm.bias", "bert.encoder.layer.{layer}.attention.output.LayerNorm.bias"),
    ("ffn_in.weight", "bert.encoder.layer.{layer}.intermediate.dense.weight"),
    ("ffn_in.bias", "bert.encoder.layer.{layer}.intermediate.dense.bias"),
    ("ffn_out.weight", "bert.encoder.layer.{layer}.output.dense.weight"),
    ("ffn_out.bias", "bert.encoder.layer.{layer}.output.dense.bias"),
    ("ffn_norm.weight", "bert.encoder.layer.{layer}.output.LayerNorm.weight"),
    ("ffn_norm.bias", "bert.encoder.layer.{layer}.output.LayerNorm.bias"),
    ("mlm_transform.weight", "cls.predictions.transform.dense.weight"),
    ("mlm_transform.bias", "cls.predictions.transform.dense.bias"),
    ("mlm_norm.weight", "cls.predictions.transform.LayerNorm.weight"),
    ("mlm_norm.bias", "cls.predictions.transform.LayerNorm.bias"),
    ("mlm_decoder.weight", "cls.predictions.decoder.weight"),
    ("mlm_decoder.bias", "cls.predictions.bias"),
];

const GPT2_NAMES: &[(&str, &str)] = &[
    ("word_embeddings", "wte.weight"),
    ("position_embeddings", "wpe.weight"),
    ("attention_norm.weight", "h.{layer}.ln_1.weight"),
    ("attention_norm.bias", "h.{layer}.ln_1.bias"),
    ("qkv.weight", "h.{layer}.attn.c_attn.weight"),
    ("qkv.bias", "h.{layer}.attn.c_attn.bias"),
    ("attention_out.weight", "h.{layer}.attn.c_proj.weight"),
    ("attention_out.bias", "h.{layer}.attn.c_proj.bias"),
    ("ffn_norm.weight", "h.{layer}.ln_2.weight"),
    ("ffn_norm.bias", "h.{layer}.ln_2.bias"),
    ("ffn_in.weight", "h.{layer}.mlp.c_fc.weight"),
    ("ffn_in.bias", "h.{layer}.mlp.c_fc.bias"),
    ("ffn_out.weight", "h.{layer}.mlp.c_proj.weight"),
    ("ffn_out.bias", "h.{layer}.mlp.c_proj.bias"),
    ("final_norm.weight", "ln_f.weight"),
    ("final_norm.bias", "ln_f.bias"),
];

impl TensorNames {
    pub fn defaults(arch: Architecture) -> TensorNames {
        let table = match arch {
            Architecture::Bert => BERT_NAMES,
            Architecture::Gpt2 => GPT2_NAMES,
        };
        TensorNames {
            templates: table
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            prefix: String::new(),
        }
    }

    /// Applies manifest overrides; unknown logical names are rejected.
    pub fn with_overrides(mut self, overrides: &BTreeMap<String, String>) -> Result<TensorNames> {
        for (k, v) in overrides {
            match self.templates.get_mut(k) {
                Some(slot) => *slot = v.clone(),
                None => {
                    return Err(Error::Load(alloc::format!(
                        "manifest names unknown parameter `{k}`"
                    )))
                }
            }
        }
        Ok(self)
    }

    /// Prepends `prefix` to every template (e.g. `transformer.`).
    pub fn with_prefix(mut self, prefix: &str) -> TensorNames {
        self.prefix = prefix.to_string();
        self
    }

    pub fn resolve(&self, param: &str, layer: Option<usize>) -> String {
        let template = self
            .templates
            .get(param)
            .map(String::as_str)
            .unwrap_or(param);
        let mut name = self.prefix.clone();
        match layer {
            Some(l) => name.push_str(&template.replace("{layer}", &alloc::format!("{l}"))),
            None => name.push_str(template),
        }
        name
    }
}
