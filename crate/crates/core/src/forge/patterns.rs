use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::metrics::perplexity;

use super::Lexicon;

/// `A(n) subject verb.PST a(n) object.` as lexicon indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SentencePattern {
    pub id: u32,
    pub subject: u32,
    pub verb: u32,
    pub object: u32,
}

/// `|N|·(|N|−1)·|V|`.
pub fn pattern_count(nouns: usize, verbs: usize) -> usize {
    nouns * nouns.saturating_sub(1) * verbs
}

/// Every (subject, verb, object) with subject ≠ object, ordered
/// subject-major, then verb, then object; ids are positions in that order.
pub fn generate_base_patterns(lex: &Lexicon) -> Result<Vec<SentencePattern>> {
    let (n, v) = (lex.nouns.len() as u32, lex.verbs.len() as u32);
    if n < 2 || v == 0 {
        return Err(Error::arg("lexicon needs at least two nouns and one verb"));
    }
    let mut out = Vec::with_capacity(pattern_count(n as usize, v as usize));
    let mut id = 0u32;
    for subject in 0..n {
        for verb in 0..v {
            for object in (0..n).filter(|&o| o != subject) {
                out.push(SentencePattern {
                    id,
                    subject,
                    verb,
                    object,
                });
                id += 1;
            }
        }
    }
    Ok(out)
}

/// Inverse of the id assignment in [`generate_base_patterns`].
pub fn pattern_by_id(lex: &Lexicon, id: u32) -> Option<SentencePattern> {
    let (n, v) = (lex.nouns.len() as u32, lex.verbs.len() as u32);
    if n < 2 || v == 0 || id as usize >= pattern_count(n as usize, v as usize) {
        return None;
    }
    let per_subject = v * (n - 1);
    let subject = id / per_subject;
    let rem = id % per_subject;
    let verb = rem / (n - 1);
    let slot = rem % (n - 1);
    let object = if slot >= subject { slot + 1 } else { slot };
    Some(SentencePattern {
        id,
        subject,
        verb,
        object,
    })
}

pub fn realize_base(lex: &Lexicon, p: &SentencePattern) -> String {
    let s = &lex.nouns[p.subject as usize];
    let o = &lex.nouns[p.object as usize];
    let v = &lex.verbs[p.verb as usize];
    alloc::format!("{} {} {} {} {}.", s.art.capitalized(), s.sg, v.past, o.art.lower(), o.sg)
}

/// The `k` lowest-scoring `(pattern id, perplexity)` entries, ties broken by
/// id, returned sorted by id.
pub fn select_lowest(scored: &[(u32, f64)], k: usize) -> Result<Vec<u32>> {
    if k > scored.len() {
        return Err(Error::arg(alloc::format!(
            "cannot select {k} patterns out of {}",
            scored.len()
        )));
    }
    let mut order: Vec<(f64, u32)> = scored.iter().map(|&(id, ppl)| (ppl, id)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut ids: Vec<u32> = order[..k].iter().map(|&(_, id)| id).collect();
    ids.sort_unstable();
    Ok(ids)
}

/// The `k` patterns whose base sentence has the lowest per-token perplexity
/// under `backend`, sorted by id.
pub fn select_core(
    patterns: &[SentencePattern],
    lex: &Lexicon,
    backend: &dyn Backend,
    k: usize,
) -> Result<Vec<SentencePattern>> {
    if k > patterns.len() {
        return Err(Error::arg(alloc::format!(
            "cannot select {k} patterns out of {}",
            patterns.len()
        )));
    }
    let scored = patterns
        .iter()
        .map(|p| Ok((p.id, perplexity(backend, &realize_base(lex, p))?.ppl)))
        .collect::<Result<Vec<_>>>()?;
    let keep = select_lowest(&scored, k)?;
    let mut by_id: Vec<SentencePattern> = patterns.to_vec();
    by_id.sort_unstable_by_key(|p| p.id);
    Ok(keep
        .into_iter()
        .filter_map(|id| by_id.binary_search_by_key(&id, |p| p.id).ok().map(|i| by_id[i]))
        .collect())
}
