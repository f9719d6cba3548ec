//! Tokenizer files, backend manifests and safetensors weights.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use half::{bf16, f16};
use safetensors::{Dtype, SafeTensors};
use serde::{Deserialize, Serialize};

use npiprobe_core::mock::{MockBackend, MockConfig};
use npiprobe_core::transformer::{Architecture, Tensor, TensorNames, TensorStore, TransformerBackend, TransformerSpec};
use npiprobe_core::{Backend, Capabilities, Tokenizer};

use crate::error::{Error, Result};
use crate::files::{read_json, read_text};

/// Directory searched for manifest-relative files that are not found next
/// to the manifest.
pub const MODEL_CACHE_ENV: &str = "NPIPROBE_MODEL_CACHE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerKind {
    Wordpiece,
    Bpe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizerSpec {
    pub kind: TokenizerKind,
    /// `vocab.txt` (wordpiece) or `vocab.json` (bpe).
    #[serde(default)]
    pub vocab: Option<String>,
    /// Inline wordpiece vocabulary, in id order.
    #[serde(default)]
    pub tokens: Option<Vec<String>>,
    #[serde(default)]
    pub merges: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifestArchitecture {
    Mock,
    Bert,
    Gpt2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub name: Option<String>,
    pub architecture: ManifestArchitecture,
    pub tokenizer: TokenizerSpec,
    #[serde(default)]
    pub weights: Option<String>,
    pub layers: usize,
    pub heads: usize,
    #[serde(default)]
    pub capabilities: Option<Vec<String>>,
    #[serde(default = "yes")]
    pub lowercase: bool,
    #[serde(default)]
    pub layer_norm_eps: Option<f32>,
    #[serde(default)]
    pub tensor_prefix: Option<String>,
    /// Logical parameter → tensor name template overrides.
    #[serde(default)]
    pub tensors: BTreeMap<String, String>,
    #[serde(flatten)]
    pub mock: MockConfig,
}

fn yes() -> bool {
    true
}

/// Resolves a manifest-relative path: absolute, next to the manifest, then
/// under the model cache directory.
pub fn resolve(base: &Path, name: &str) -> PathBuf {
    let direct = base.join(name);
    if direct.exists() {
        return direct;
    }
    if let Some(cache) = std::env::var_os(MODEL_CACHE_ENV) {
        let cached = Path::new(&cache).join(name);
        if cached.exists() {
            return cached;
        }
    }
    direct
}

/// Loads a tokenizer from files. For bpe, `path` is the `vocab.json` and the
/// merges file is `merges` (default `merges.txt` beside it).
pub fn load_tokenizer(path: &Path, kind: TokenizerKind, lowercase: bool, merges: Option<&Path>) -> Result<Tokenizer> {
    match kind {
        TokenizerKind::Wordpiece => Ok(Tokenizer::from_wordpiece_vocab(&read_text(path)?, lowercase)?),
        TokenizerKind::Bpe => {
            let map: BTreeMap<String, u32> = read_json(path)?;
            let merges = merges
                .map(Path::to_path_buf)
                .unwrap_or_else(|| path.with_file_name("merges.txt"));
            Ok(Tokenizer::from_bpe(map, &read_text(&merges)?)?)
        }
    }
}

fn manifest_tokenizer(m: &Manifest, base: &Path) -> Result<Tokenizer> {
    let spec = &m.tokenizer;
    if let Some(tokens) = &spec.tokens {
        if spec.kind != TokenizerKind::Wordpiece {
            return Err(Error::Config("inline tokens are only supported for wordpiece".into()));
        }
        let mut text = tokens.join("\n");
        text.push('\n');
        return Ok(Tokenizer::from_wordpiece_vocab(&text, m.lowercase)?);
    }
    let vocab = spec
        .vocab
        .as_deref()
        .ok_or_else(|| Error::Config("tokenizer needs `vocab` or `tokens`".into()))?;
    let merges = spec.merges.as_deref().map(|f| resolve(base, f));
    load_tokenizer(&resolve(base, vocab), spec.kind, m.lowercase, merges.as_deref())
}

fn to_f32(name: &str, dtype: Dtype, raw: &[u8]) -> Result<Vec<f32>> {
    let chunks = |w: usize| raw.chunks_exact(w);
    Ok(match dtype {
        Dtype::F32 => chunks(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect(),
        Dtype::F16 => chunks(2)
            .map(|c| f16::from_le_bytes(c.try_into().unwrap()).to_f32())
            .collect(),
        Dtype::BF16 => chunks(2)
            .map(|c| bf16::from_le_bytes(c.try_into().unwrap()).to_f32())
            .collect(),
        Dtype::F64 => chunks(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()) as f32)
            .collect(),
        other => {
            return Err(npiprobe_core::Error::Load(format!("tensor {name}: unsupported dtype {other:?}")).into())
        }
    })
}

/// Every floating-point tensor of a safetensors file, widened to f32.
pub fn read_safetensors(path: &Path) -> Result<TensorStore> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let st = SafeTensors::deserialize(&bytes)
        .map_err(|e| npiprobe_core::Error::Load(format!("{}: {e}", path.display())))?;
    let mut store = TensorStore::new();
    for (name, view) in st.tensors() {
        if matches!(view.dtype(), Dtype::I64 | Dtype::I32 | Dtype::U8 | Dtype::BOOL) {
            // buffers such as position_ids
            continue;
        }
        let data = to_f32(&name, view.dtype(), view.data())?;
        store.insert(name, Tensor::new(view.shape().to_vec(), data)?);
    }
    Ok(store)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    read_json(path)
}

/// Reads a manifest and builds its backend.
pub fn load_backend(path: &Path) -> Result<Box<dyn Backend>> {
    let m = read_manifest(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    build_backend(&m, base)
}

pub fn build_backend(m: &Manifest, base: &Path) -> Result<Box<dyn Backend>> {
    let tokenizer = manifest_tokenizer(m, base)?;
    let claimed = m.capabilities.as_deref().map(Capabilities::parse).transpose()?;
    let name = m.name.clone().unwrap_or_else(|| format!("{:?}", m.architecture).to_lowercase());
    match m.architecture {
        ManifestArchitecture::Mock => {
            let has_mask = tokenizer.specials().mask.is_some();
            let derived = Capabilities {
                masked_prediction: has_mask,
                causal_scoring: true,
                attention_export: true,
            };
            let caps = match claimed {
                None => derived,
                Some(c) => {
                    if c.masked_prediction && !has_mask {
                        return Err(npiprobe_core::Error::Capability(
                            "manifest claims masked-prediction but the tokenizer has no mask token".into(),
                        )
                        .into());
                    }
                    c
                }
            };
            Ok(Box::new(
                MockBackend::new(&name, m.layers, m.heads, tokenizer, &m.mock)?.with_capabilities(caps),
            ))
        }
        ManifestArchitecture::Bert | ManifestArchitecture::Gpt2 => {
            let architecture = if m.architecture == ManifestArchitecture::Bert {
                Architecture::Bert
            } else {
                Architecture::Gpt2
            };
            let weights = m
                .weights
                .as_deref()
                .ok_or_else(|| Error::Config("transformer manifest needs `weights`".into()))?;
            let store = read_safetensors(&resolve(base, weights))?;
            let mut names = TensorNames::defaults(architecture).with_overrides(&m.tensors)?;
            let prefix = match &m.tensor_prefix {
                Some(p) => p.clone(),
                None => detect_prefix(&store, architecture),
            };
            names = names.with_prefix(&prefix);
            let spec = TransformerSpec {
                name,
                architecture,
                layers: m.layers,
                heads: m.heads,
                layer_norm_eps: m.layer_norm_eps,
                names,
                claimed,
            };
            Ok(Box::new(TransformerBackend::from_store(spec, store, tokenizer)?))
        }
    }
}

/// Checkpoints exported from a GPT-2 LM-head model carry a `transformer.`
/// prefix.
fn detect_prefix(store: &TensorStore, arch: Architecture) -> String {
    match arch {
        Architecture::Gpt2 if store.contains_key("transformer.wte.weight") => "transformer.".into(),
        _ => String::new(),
    }
}
