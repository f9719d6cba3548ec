//! CSV tables, SVG plots and the saliency gallery for a finished run.
//!
//! Every plotted number carries `data-value` (the JSON number text from the
//! artifact) and `data-field` (`<artifact>#<json pointer>`).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use npiprobe_core::attention::{html_spans, SaliencyMap};
use npiprobe_core::contrast::SweepMode;
use npiprobe_core::experiment::AnalysisRow;

use crate::error::{Error, Result};
use crate::files::{read_json, sha256_file, sha256_hex, write_atomic, write_json};
use crate::pipeline::{DominanceEntry, FlipEntry, ProbeHeads, RunManifest, SweepEntry};

pub const DOMINANCE: &str = "compare/dominance.json";
pub const SWEEPS: &str = "compare/sweeps.json";
pub const FLIPS: &str = "compare/flips.json";
pub const ANALYSIS: &str = "experiment/analysis.json";
pub const HEADS: &str = "probe/heads.json";
pub const SALIENCY: &str = "probe/saliency.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleIndex {
    pub manifest_sha256: String,
    /// File name → sha256.
    pub files: BTreeMap<String, String>,
}

/// JSON text of a number, as serde_json writes it in the artifacts.
pub fn num(v: f64) -> String {
    serde_json::to_string(&v).expect("f64 serializes")
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}

/// Loads an artifact the manifest lists; unlisted artifacts are absent.
fn artifact<T: DeserializeOwned>(dir: &Path, manifest: &RunManifest, rel: &str) -> Result<Option<T>> {
    let Some(expected) = manifest.artifact(rel) else {
        return Ok(None);
    };
    let path = dir.join(rel);
    if !path.exists() {
        return Err(Error::MissingArtifact(rel.to_string()));
    }
    let found = sha256_file(&path)?;
    if found != expected {
        return Err(Error::Stale {
            path,
            expected: expected.to_string(),
            found,
        });
    }
    read_json(&path).map(Some)
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

const SVG_HEAD: &str = "<svg xmlns=\"http://www.w3.org/2000/svg\"";

/// Horizontal percentage bars, highest first, with a 50% guide.
struct Bar {
    label: String,
    value: f64,
    field: String,
}

fn bar_chart(title: &str, bars: &mut [Bar]) -> String {
    bars.sort_by(|a, b| b.value.total_cmp(&a.value).then_with(|| a.label.cmp(&b.label)));
    let (left, width, row, top) = (240.0, 400.0, 20.0, 40.0);
    let height = top + row * bars.len() as f64 + 40.0;
    let x = |v: f64| left + width * v / 100.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{SVG_HEAD} width=\"{w:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {w:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"12\">",
        w = left + width + 40.0
    );
    let _ = writeln!(s, "<title>{}</title>", esc(title));
    let _ = writeln!(s, "<text x=\"{left:.2}\" y=\"20\" font-size=\"14\">{}</text>", esc(title));
    let axis_y = top + row * bars.len() as f64;
    let _ = writeln!(s, "<g class=\"axis\" data-min=\"0\" data-max=\"100\">");
    for t in [0.0, 25.0, 50.0, 75.0, 100.0] {
        let _ = writeln!(
            s,
            "<line x1=\"{0:.2}\" y1=\"{top:.2}\" x2=\"{0:.2}\" y2=\"{axis_y:.2}\" stroke=\"#DDDDDD\"/><text x=\"{0:.2}\" y=\"{1:.2}\" text-anchor=\"middle\">{t}</text>",
            x(t),
            axis_y + 16.0
        );
    }
    let _ = writeln!(s, "</g>");
    for (i, b) in bars.iter().enumerate() {
        let y = top + row * i as f64;
        let _ = writeln!(
            s,
            "<g class=\"bar\" data-field=\"{}\" data-value=\"{}\"><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text><rect x=\"{left:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#4C72B0\"/></g>",
            esc(&b.field),
            num(b.value),
            left - 6.0,
            y + row * 0.7,
            esc(&b.label),
            y + 2.0,
            x(b.value.clamp(0.0, 100.0)) - left,
            row - 4.0
        );
    }
    let _ = writeln!(
        s,
        "<line class=\"guide\" x1=\"{0:.2}\" y1=\"{top:.2}\" x2=\"{0:.2}\" y2=\"{axis_y:.2}\" stroke=\"#C44E52\" stroke-dasharray=\"4 3\"/>",
        x(50.0)
    );
    s.push_str("</svg>\n");
    s
}

struct Series {
    name: String,
    points: Vec<(u32, f64, String)>,
}

const SWEEP_TICKS: [u32; 11] = [2, 5, 10, 20, 30, 40, 50, 60, 70, 80, 90];

fn line_chart(title: &str, series: &[Series]) -> String {
    let (left, top, width, height) = (60.0, 40.0, 480.0, 260.0);
    let x = |n: u32| left + width * (n as f64 - 2.0) / 88.0;
    let y = |v: f64| top + height * (1.0 - v.clamp(0.0, 100.0) / 100.0);
    let colors = ["#4C72B0", "#DD8452", "#55A868", "#C44E52"];
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{SVG_HEAD} width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\" font-size=\"12\">",
        w = left + width + 140.0,
        h = top + height + 50.0
    );
    let _ = writeln!(s, "<title>{}</title>", esc(title));
    let _ = writeln!(s, "<text x=\"{left:.2}\" y=\"20\" font-size=\"14\">{}</text>", esc(title));
    let _ = writeln!(s, "<g class=\"axis x\" data-min=\"2\" data-max=\"90\">");
    for t in SWEEP_TICKS {
        let _ = writeln!(
            s,
            "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{0:.2}\" y2=\"{2:.2}\" stroke=\"#DDDDDD\"/><text x=\"{0:.2}\" y=\"{3:.2}\" text-anchor=\"middle\">{t}</text>",
            x(t),
            top,
            top + height,
            top + height + 16.0
        );
    }
    let _ = writeln!(s, "</g>\n<g class=\"axis y\" data-min=\"0\" data-max=\"100\">");
    for t in [0.0, 25.0, 50.0, 75.0, 100.0] {
        let _ = writeln!(
            s,
            "<line x1=\"{left:.2}\" y1=\"{0:.2}\" x2=\"{1:.2}\" y2=\"{0:.2}\" stroke=\"#DDDDDD\"/><text x=\"{2:.2}\" y=\"{3:.2}\" text-anchor=\"end\">{t}</text>",
            y(t),
            left + width,
            left - 6.0,
            y(t) + 4.0
        );
    }
    let _ = writeln!(s, "</g>");
    for (i, line) in series.iter().enumerate() {
        let color = colors[i % colors.len()];
        let pts: Vec<String> = line.points.iter().map(|(n, v, _)| format!("{:.2},{:.2}", x(*n), y(*v))).collect();
        let _ = writeln!(s, "<g class=\"series\" data-name=\"{}\">", esc(&line.name));
        let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>", pts.join(" "));
        for (n, v, field) in &line.points {
            let _ = writeln!(
                s,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\" data-x=\"{n}\" data-field=\"{}\" data-value=\"{}\"/>",
                x(*n),
                y(*v),
                esc(field),
                num(*v)
            );
        }
        let ly = top + 16.0 * i as f64;
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{ly:.2}\" fill=\"{color}\">{}</text>\n</g>",
            left + width + 10.0,
            esc(&line.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// p-hat with Clopper-Pearson whiskers per condition pair, on a 0..1 axis.
fn analysis_chart(rows: &[AnalysisRow]) -> String {
    let (left, width, row, top) = (240.0, 400.0, 24.0, 40.0);
    let height = top + row * rows.len() as f64 + 40.0;
    let x = |v: f64| left + width * v;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{SVG_HEAD} width=\"{w:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {w:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"12\">",
        w = left + width + 40.0
    );
    s.push_str("<title>forced-choice preference</title>\n");
    let axis_y = top + row * rows.len() as f64;
    let _ = writeln!(s, "<g class=\"axis\" data-min=\"0\" data-max=\"1\">");
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            s,
            "<line x1=\"{0:.2}\" y1=\"{top:.2}\" x2=\"{0:.2}\" y2=\"{axis_y:.2}\" stroke=\"#DDDDDD\"/><text x=\"{0:.2}\" y=\"{1:.2}\" text-anchor=\"middle\">{t}</text>",
            x(t),
            axis_y + 16.0
        );
    }
    let _ = writeln!(s, "</g>");
    for (i, r) in rows.iter().enumerate() {
        let cy = top + row * i as f64 + row / 2.0;
        let label = format!("{} vs {}", r.condition_a, r.condition_b);
        let _ = write!(
            s,
            "<g class=\"pair\" data-k=\"{}\" data-n=\"{}\"><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            r.k,
            r.n,
            left - 6.0,
            cy + 4.0,
            esc(&label)
        );
        if let Some(b) = &r.result {
            let base = format!("{ANALYSIS}#/{i}/result");
            let _ = write!(
                s,
                "<line x1=\"{:.2}\" y1=\"{cy:.2}\" x2=\"{:.2}\" y2=\"{cy:.2}\" stroke=\"#333333\" data-field-low=\"{base}/ci_low\" data-low=\"{}\" data-field-high=\"{base}/ci_high\" data-high=\"{}\"/><circle cx=\"{:.2}\" cy=\"{cy:.2}\" r=\"4\" fill=\"#4C72B0\" data-field=\"{base}/p_hat\" data-value=\"{}\"/>",
                x(b.ci_low),
                x(b.ci_high),
                num(b.ci_low),
                num(b.ci_high),
                x(b.p_hat),
                num(b.p_hat)
            );
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

fn gallery(maps: &[SaliencyMap]) -> String {
    let mut s = String::from(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>saliency gallery</title>\n</head>\n<body>\n<h1>Saliency</h1>\n",
    );
    if maps.is_empty() {
        s.push_str("<p>No saliency maps in this run.</p>\n");
    }
    for m in maps {
        let _ = writeln!(
            s,
            "<section data-sentence-id=\"{}\" data-layer=\"{}\" data-head=\"{}\">\n<h2>sentence {} at head ({},{})</h2>\n<p>{}</p>\n</section>",
            m.sentence_id,
            m.layer,
            m.head,
            m.sentence_id,
            m.layer,
            m.head,
            html_spans(m)
        );
    }
    s.push_str("</body>\n</html>\n");
    s
}

/// Renders the bundle for the run whose manifest is at `manifest_path`
/// into `out` (default: `report/` beside the manifest).
pub fn report(manifest_path: &Path, out: Option<&Path>) -> Result<BundleIndex> {
    let manifest: RunManifest = read_json(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let out: PathBuf = out.map(Path::to_path_buf).unwrap_or_else(|| dir.join("report"));
    let mut files = BTreeMap::new();
    let mut emit = |name: &str, bytes: &[u8]| -> Result<()> {
        write_atomic(&out.join(name), bytes)?;
        files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    };

    let dom: Vec<DominanceEntry> = artifact(dir, &manifest, DOMINANCE)?.unwrap_or_default();
    emit(
        "dominance.csv",
        &csv_bytes(
            &["a", "b", "metric", "n_pairs", "a_better", "b_better", "ties", "pct_a_better", "pct_b_better", "pct_tie"],
            dom.iter().map(|d| {
                let r = &d.result;
                vec![
                    d.a.clone(),
                    d.b.clone(),
                    d.metric.name().into(),
                    r.n_pairs.to_string(),
                    r.a_better.to_string(),
                    r.b_better.to_string(),
                    r.ties.to_string(),
                    num(r.pct_a_better),
                    num(r.pct_b_better),
                    num(r.pct_tie),
                ]
            }),
        ),
    )?;
    let mut by_metric: BTreeMap<&str, Vec<Bar>> = BTreeMap::new();
    for (i, d) in dom.iter().enumerate() {
        by_metric.entry(d.metric.name()).or_default().push(Bar {
            label: format!("{} > {}", d.a, d.b),
            value: d.result.pct_a_better,
            field: format!("{DOMINANCE}#/{i}/result/pct_a_better"),
        });
    }
    for (metric, bars) in &mut by_metric {
        emit(&format!("dominance-{metric}.svg"), bar_chart(&format!("dominance ({metric})"), bars).as_bytes())?;
    }

    let sweeps: Vec<SweepEntry> = artifact(dir, &manifest, SWEEPS)?.unwrap_or_default();
    emit(
        "sweeps.csv",
        &csv_bytes(
            &["kind", "mode", "metric", "base", "x", "y", "n"],
            sweeps.iter().flat_map(|e| {
                let c = &e.curve;
                c.points.iter().map(move |p| {
                    vec![
                        c.kind.slug().into(),
                        mode_name(c.mode).into(),
                        c.metric.name().into(),
                        c.base.map(|b| b.to_string()).unwrap_or_default(),
                        p.x.to_string(),
                        num(p.y),
                        p.n.to_string(),
                    ]
                })
            }),
        ),
    )?;
    let mut grouped: BTreeMap<(String, String), Vec<Series>> = BTreeMap::new();
    for (i, e) in sweeps.iter().enumerate() {
        let c = &e.curve;
        let name = match c.base {
            Some(b) => format!("{} (base {b})", mode_name(c.mode)),
            None => mode_name(c.mode).to_string(),
        };
        grouped
            .entry((c.kind.slug().to_string(), c.metric.name().to_string()))
            .or_default()
            .push(Series {
                name,
                points: c
                    .points
                    .iter()
                    .enumerate()
                    .map(|(j, p)| (p.x, p.y, format!("{SWEEPS}#/{i}/curve/points/{j}/y")))
                    .collect(),
            });
    }
    for ((kind, metric), series) in &grouped {
        emit(
            &format!("sweep-{kind}-{metric}.svg"),
            line_chart(&format!("{kind} numeral sweep ({metric})"), series).as_bytes(),
        )?;
    }

    let flips: Vec<FlipEntry> = artifact(dir, &manifest, FLIPS)?.unwrap_or_default();
    emit(
        "flips.csv",
        &csv_bytes(
            &["a", "b", "metric", "forward_pct", "reversed_pct"],
            flips.iter().map(|f| {
                vec![
                    f.a.clone(),
                    f.b.clone(),
                    f.report.metric.name().into(),
                    num(f.report.forward_pct),
                    num(f.report.reversed_pct),
                ]
            }),
        ),
    )?;

    let analysis: Vec<AnalysisRow> = artifact(dir, &manifest, ANALYSIS)?.unwrap_or_default();
    emit(
        "analysis.csv",
        &csv_bytes(
            &["condition_a", "condition_b", "k", "n", "p_hat", "p_value", "ci_low", "ci_high"],
            analysis.iter().map(|r| {
                let b = r.result.as_ref();
                vec![
                    r.condition_a.to_string(),
                    r.condition_b.to_string(),
                    r.k.to_string(),
                    r.n.to_string(),
                    opt(b.map(|b| b.p_hat)),
                    opt(b.map(|b| b.p_value)),
                    opt(b.map(|b| b.ci_low)),
                    opt(b.map(|b| b.ci_high)),
                ]
            }),
        ),
    )?;
    if !analysis.is_empty() {
        emit("analysis.svg", analysis_chart(&analysis).as_bytes())?;
    }

    let heads: Option<ProbeHeads> = artifact(dir, &manifest, HEADS)?;
    emit(
        "heads.csv",
        &csv_bytes(
            &["rank", "layer", "head", "mean_attention"],
            heads.iter().flat_map(|h| {
                h.search.profiles.iter().enumerate().map(|(i, p)| {
                    vec![(i + 1).to_string(), p.layer.to_string(), p.head.to_string(), num(p.mean_attention)]
                })
            }),
        ),
    )?;

    let maps: Vec<SaliencyMap> = artifact(dir, &manifest, SALIENCY)?.unwrap_or_default();
    emit("gallery.html", gallery(&maps).as_bytes())?;

    let index = BundleIndex {
        manifest_sha256: sha256_file(manifest_path)?,
        files,
    };
    write_json(&out.join("index.json"), &index)?;
    Ok(index)
}

fn mode_name(m: SweepMode) -> &'static str {
    match m {
        SweepMode::VsBase => "vs-base",
        SweepMode::Gap => "gap",
    }
}
