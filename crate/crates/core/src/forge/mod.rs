//! Dataset construction: lexicon, base patterns, core selection,
//! per-condition realization, subject replacement, and natural-corpus mining.

mod condition;
pub mod inflect;
mod lexicon;
pub mod mining;
mod patterns;
mod realize;

pub use condition::{Condition, ConditionKind};
pub use inflect::{number_word, past_tense, pluralize, third_singular};
pub use lexicon::{Article, Lexicon, Noun, Verb, DEFAULT_NOUN_CAP, DEFAULT_VERB_CAP};
pub use mining::{mine_negation_pairs, mine_nobody_pairs, pairs_to_datasets, MinimalPair, MiningReport};
pub use patterns::{
    generate_base_patterns, pattern_by_id, pattern_count, realize_base, select_core, select_lowest,
    SentencePattern,
};
pub use realize::{derive_subject_replacement, realize_condition, Polarity, ProbeSentence, Variant};

/// Bumped whenever generated text for a given lexicon could change.
pub const GENERATOR_VERSION: &str = "forge-1";

/// Bumped whenever the mining heuristics change.
pub const MINER_VERSION: &str = "miner-1";
