//! Licensor-tracking attention heads and per-token saliency maps.
//!
//! Layer and head numbers in every output are 1-based.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::forge::ProbeSentence;
use crate::tokenizer::{Span, TokenSequence, TokenizerKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadProfile {
    pub layer: usize,
    pub head: usize,
    pub mean_attention: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadSearch {
    pub profiles: Vec<HeadProfile>,
    pub used: usize,
    /// Ids of sentences without a licensor or an any token.
    pub skipped: Vec<u64>,
}

fn any_position(seq: &TokenSequence, s: &ProbeSentence) -> Option<usize> {
    seq.positions_within(&s.any_span()).first().copied()
}

/// Attention mass from the any query to the licensor tokens, one entry per
/// (layer, head) in layer-major order. `None` when the sentence has no
/// licensor or no any token.
pub fn licensor_mass(backend: &dyn Backend, s: &ProbeSentence) -> Result<Option<Vec<f64>>> {
    if s.licensor_span().is_empty() {
        return Ok(None);
    }
    let seq = backend.tokenizer().encode(&s.text, true)?;
    let Some(q) = any_position(&seq, s) else { return Ok(None) };
    let keys = seq.positions_within(&s.licensor_span());
    if keys.is_empty() {
        return Ok(None);
    }
    let att = backend.attention_map(&seq)?;
    let mut out = Vec::with_capacity(att.layers * att.heads);
    for l in 0..att.layers {
        for h in 0..att.heads {
            let row = att.row(l, h, q);
            out.push(keys.iter().map(|&k| row[k]).sum());
        }
    }
    Ok(Some(out))
}

/// Averages per-sentence masses into profiles sorted by descending mean
/// (ties by layer, then head). Summation runs over sorted values so the
/// result does not depend on sentence order.
pub fn aggregate_profiles(layers: usize, heads: usize, masses: &[Vec<f64>]) -> Result<Vec<HeadProfile>> {
    if masses.is_empty() {
        return Err(Error::arg("no sentence has both a licensor and an any token"));
    }
    let mut profiles = Vec::with_capacity(layers * heads);
    let mut column = Vec::with_capacity(masses.len());
    for l in 0..layers {
        for h in 0..heads {
            column.clear();
            for m in masses {
                column.push(*m.get(l * heads + h).ok_or_else(|| Error::arg("mass vector has the wrong size"))?);
            }
            column.sort_by(f64::total_cmp);
            let mean = column.iter().sum::<f64>() / masses.len() as f64;
            profiles.push(HeadProfile {
                layer: l + 1,
                head: h + 1,
                mean_attention: mean.clamp(0.0, 1.0),
            });
        }
    }
    profiles.sort_by(|a, b| {
        b.mean_attention
            .total_cmp(&a.mean_attention)
            .then(a.layer.cmp(&b.layer))
            .then(a.head.cmp(&b.head))
    });
    Ok(profiles)
}

pub fn head_search(backend: &dyn Backend, sentences: &[ProbeSentence]) -> Result<HeadSearch> {
    let info = backend.info();
    let mut masses = Vec::new();
    let mut skipped = Vec::new();
    for s in sentences {
        match licensor_mass(backend, s)? {
            Some(m) => masses.push(m),
            None => skipped.push(s.id),
        }
    }
    Ok(HeadSearch {
        profiles: aggregate_profiles(info.layers, info.heads, &masses)?,
        used: masses.len(),
        skipped,
    })
}

/// Mean attention from any to the numeral and to the quantifier words, for
/// one numeral value at one head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumeralRatio {
    pub numeral: u32,
    pub sentences: usize,
    pub mean_numeral: f64,
    pub mean_quantifier: f64,
    /// `mean_numeral / mean_quantifier`; infinite when the quantifier gets
    /// no attention.
    pub ratio: f64,
}

/// Splits a numeric licensor into (quantifier words, numeral words).
fn quantifier_numeral_spans(s: &ProbeSentence) -> Option<(Span, Span)> {
    let words = s.condition.kind.quantifier_words()?;
    s.condition.n?;
    let lic = s.licensor_span();
    let q_end = lic.start + words.len();
    if q_end + 1 >= lic.end || !s.text[lic.start..q_end].eq_ignore_ascii_case(words) {
        return None;
    }
    Some((Span::new(lic.start, q_end), Span::new(q_end + 1, lic.end)))
}

/// Numeral/quantifier attention at one (1-based) head, grouped by numeral.
pub fn numeral_ratio(
    backend: &dyn Backend,
    sentences: &[ProbeSentence],
    layer: usize,
    head: usize,
) -> Result<Vec<NumeralRatio>> {
    let (l, h) = check_head(backend, layer, head)?;
    let mut acc: alloc::collections::BTreeMap<u32, (usize, f64, f64)> = Default::default();
    for s in sentences {
        let (Some((qs, ns)), Some(n)) = (quantifier_numeral_spans(s), s.condition.n) else { continue };
        let seq = backend.tokenizer().encode(&s.text, true)?;
        let Some(q) = any_position(&seq, s) else { continue };
        let att = backend.attention_map(&seq)?;
        let row = att.row(l, h, q);
        let mass = |span: &Span| seq.positions_within(span).iter().map(|&k| row[k]).sum::<f64>();
        let e = acc.entry(n).or_default();
        e.0 += 1;
        e.1 += mass(&ns);
        e.2 += mass(&qs);
    }
    Ok(acc
        .into_iter()
        .map(|(numeral, (count, num, quant))| {
            let (mean_numeral, mean_quantifier) = (num / count as f64, quant / count as f64);
            NumeralRatio {
                numeral,
                sentences: count,
                mean_numeral,
                mean_quantifier,
                ratio: mean_numeral / mean_quantifier,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMap {
    pub sentence_id: u64,
    pub layer: usize,
    pub head: usize,
    pub tokens: Vec<String>,
    pub weights: Vec<f64>,
    pub colors: Vec<String>,
}

/// `#FFxxxx` with `xx = 0xFF − round(0xC8 · w / w_max)`; all white when
/// `w_max` is zero.
pub fn color_for(w: f64, w_max: f64) -> [u8; 3] {
    if w_max <= 0.0 || w <= 0.0 {
        return [0xFF; 3];
    }
    let shade = libm::round(200.0 * (w / w_max).min(1.0)) as u8;
    let gb = 0xFF - shade;
    [0xFF, gb, gb]
}

pub fn hex(rgb: [u8; 3]) -> String {
    alloc::format!("#{:02X}{:02X}{:02X}", rgb[0], rgb[1], rgb[2])
}

/// Colors for a weight vector, normalized by its maximum.
pub fn colors(weights: &[f64]) -> Vec<String> {
    let w_max = weights.iter().copied().fold(0.0, f64::max);
    weights.iter().map(|&w| hex(color_for(w, w_max))).collect()
}

fn check_head(backend: &dyn Backend, layer: usize, head: usize) -> Result<(usize, usize)> {
    let info = backend.info();
    if layer == 0 || layer > info.layers || head == 0 || head > info.heads {
        return Err(Error::arg(alloc::format!(
            "head ({layer},{head}) outside 1..={} × 1..={}",
            info.layers,
            info.heads
        )));
    }
    Ok((layer - 1, head - 1))
}

fn token_text(backend: &dyn Backend, id: u32) -> String {
    let tok = backend.tokenizer();
    let sp = tok.specials();
    let special = [sp.start, sp.end, sp.mask].contains(&Some(id));
    match tok.kind() {
        TokenizerKind::Bpe if !special => tok.decode(&[id]),
        _ => tok.token(id).unwrap_or_default().to_string(),
    }
}

/// The attention row of the any query at a 1-based (layer, head), special
/// markers included.
pub fn saliency(backend: &dyn Backend, s: &ProbeSentence, layer: usize, head: usize) -> Result<SaliencyMap> {
    let (l, h) = check_head(backend, layer, head)?;
    let seq = backend.tokenizer().encode(&s.text, true)?;
    let q = any_position(&seq, s)
        .ok_or_else(|| Error::arg(alloc::format!("sentence {} has no any token", s.id)))?;
    let att = backend.attention_map(&seq)?;
    let weights = att.row(l, h, q).to_vec();
    Ok(SaliencyMap {
        sentence_id: s.id,
        layer,
        head,
        tokens: seq.ids.iter().map(|&id| token_text(backend, id)).collect(),
        colors: colors(&weights),
        weights,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderFormat {
    Html,
    Ansi,
}

fn escape_html(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
}

pub fn render(map: &SaliencyMap, format: RenderFormat) -> String {
    match format {
        RenderFormat::Html => render_html(map),
        RenderFormat::Ansi => render_ansi(map),
    }
}

/// Standalone HTML document, one span per token.
pub fn render_html(map: &SaliencyMap) -> String {
    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n");
    let _ = writeln!(
        out,
        "<title>sentence {} layer {} head {}</title>",
        map.sentence_id, map.layer, map.head
    );
    out.push_str("</head>\n<body>\n<p>");
    out.push_str(&html_spans(map));
    out.push_str("</p>\n</body>\n</html>\n");
    out
}

/// The span sequence alone, for embedding in a gallery page.
pub fn html_spans(map: &SaliencyMap) -> String {
    let mut out = String::new();
    for (i, (token, color)) in map.tokens.iter().zip(&map.colors).enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "<span style=\"background-color:{color}\">");
        escape_html(token, &mut out);
        out.push_str("</span>");
    }
    out
}

/// 24-bit background escapes with black text, one line.
pub fn render_ansi(map: &SaliencyMap) -> String {
    let w_max = map.weights.iter().copied().fold(0.0, f64::max);
    let mut out = String::new();
    for (i, (token, &w)) in map.tokens.iter().zip(&map.weights).enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let [r, g, b] = color_for(w, w_max);
        let _ = write!(out, "\x1b[48;2;{r};{g};{b}m\x1b[38;2;0;0;0m{token}\x1b[0m");
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn color_endpoints() {
        assert_eq!(hex(color_for(0.0, 0.7)), "#FFFFFF");
        assert_eq!(hex(color_for(0.7, 0.7)), "#FF3737");
        assert_eq!(hex(color_for(0.0, 0.0)), "#FFFFFF");
        // 200 · 0.25 = 50 → 0xFF − 50 = 0xCD
        assert_eq!(hex(color_for(0.25, 1.0)), "#FFCDCD");
    }

    #[test]
    fn empty_weights_render_white() {
        let map = SaliencyMap {
            sentence_id: 0,
            layer: 1,
            head: 1,
            tokens: alloc::vec!["a".into(), "<b>".into()],
            weights: alloc::vec![0.0, 0.0],
            colors: colors(&[0.0, 0.0]),
        };
        let html = render_html(&map);
        assert!(html.contains("<span style=\"background-color:#FFFFFF\">&lt;b&gt;</span>"));
        assert!(!html.contains("#FFFF00"));
    }
}
