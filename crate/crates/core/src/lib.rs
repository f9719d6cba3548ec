//! Measuring negative-polarity-item acceptability in pretrained language
//! models.
//!
//! The crate is `no_std` (it needs `alloc`) and contains everything that is
//! pure computation: tokenizers, the model backends (a deterministic mock and
//! BERT/GPT-2 style transformers over an in-memory tensor store), dataset
//! generation and corpus mining, the cloze and perplexity-difference metrics,
//! pairwise dominance statistics with exact binomial inference, attention-head
//! probing, and the forced-choice experiment state machine.
//!
//! File formats, weight loading, parallel scoring, persistence, and the HTTP
//! service live in the `npiprobe` companion crate.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod attention;
pub mod backend;
pub mod contrast;
pub mod error;
pub mod experiment;
pub mod forge;
pub mod metrics;
pub mod mock;
pub mod tokenizer;
pub mod transformer;

pub use backend::{AttentionTensor, Backend, Capabilities, Distribution, ModelInfo};
pub use error::{Error, Result};
pub use tokenizer::{Span, TokenSequence, Tokenizer, TokenizerKind};

/// Floating-point width used for every probability and score.
pub const SCORING_PRECISION: &str = "f64";
