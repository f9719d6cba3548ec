//! Config-driven runs: forge → score → compare → probe → experiment, with a
//! hash manifest so a rerun only redoes stages whose inputs changed.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use npiprobe_core::attention::{head_search, numeral_ratio, saliency, HeadSearch, NumeralRatio, SaliencyMap};
use npiprobe_core::contrast::{
    dominance, flip_probe, is_sweep_numeral, sweep_gap, sweep_vs_base, Alternative, DominanceResult, FlipReport,
    SweepCurve, SweepMode, DEFAULT_BASE,
};
use npiprobe_core::experiment::{analyze, design_conditions, sample_items, session_summaries};
use npiprobe_core::forge::{
    derive_subject_replacement, generate_base_patterns, mine_negation_pairs, mine_nobody_pairs, pairs_to_datasets,
    realize_condition, Condition, ConditionKind, Lexicon, Polarity, ProbeSentence, SentencePattern, Variant,
    GENERATOR_VERSION, MINER_VERSION,
};
use npiprobe_core::metrics::{MetricKind, ScoreTable};
use npiprobe_core::Backend;

use crate::error::{Error, Result};
use crate::files::{
    lineage_hash, read_controls, read_dataset, read_json, read_lexicon, read_scores, read_text, sha256_file,
    sha256_hex, to_json_bytes, write_atomic, write_dataset, write_json, write_scores,
};
use crate::journal::replay;
use crate::loader::load_backend;
use crate::scoring;

pub const CONFIG_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendPaths {
    #[serde(default)]
    pub masked: Option<PathBuf>,
    #[serde(default)]
    pub causal: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForgeConfig {
    #[serde(default)]
    pub nouns: Option<usize>,
    #[serde(default)]
    pub verbs: Option<usize>,
    pub core_size: usize,
    /// Condition strings such as `neg` or `at-least:5`.
    #[serde(default)]
    pub conditions: Vec<String>,
    #[serde(default)]
    pub subject_replacement: bool,
    #[serde(default)]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub kind: String,
    pub mode: SweepMode,
    #[serde(default)]
    pub base: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlipSpec {
    /// `at-least:2`
    pub a: String,
    pub b: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparePlan {
    /// Dataset keys: a condition string, `subject-no`, `natural-neg`, ...
    #[serde(default)]
    pub pairs: Vec<[String; 2]>,
    #[serde(default)]
    pub sweeps: Vec<SweepSpec>,
    #[serde(default)]
    pub flips: Vec<FlipSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// Dataset key searched for licensor heads.
    #[serde(default = "default_probe_dataset")]
    pub dataset: String,
    /// 1-based; the top-ranked head when absent.
    #[serde(default)]
    pub layer: Option<usize>,
    #[serde(default)]
    pub head: Option<usize>,
    #[serde(default)]
    pub gallery: Vec<String>,
    #[serde(default = "default_gallery_size")]
    pub gallery_size: usize,
    /// Quantifier kind whose sweep datasets feed the numeral ratio.
    #[serde(default)]
    pub numerals: Option<String>,
}

fn default_probe_dataset() -> String {
    "neg".into()
}

fn default_gallery_size() -> usize {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub controls: PathBuf,
    #[serde(default = "default_n_patterns")]
    pub n_patterns: usize,
    #[serde(default)]
    pub journal: Option<PathBuf>,
    #[serde(default)]
    pub alternative: Alternative,
}

fn default_n_patterns() -> usize {
    50
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,
    pub lexicon: PathBuf,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub backends: BackendPaths,
    #[serde(default)]
    pub forge: Option<ForgeConfig>,
    #[serde(default)]
    pub metrics: Vec<MetricKind>,
    #[serde(default)]
    pub compare: Option<ComparePlan>,
    #[serde(default)]
    pub probe: Option<ProbeConfig>,
    #[serde(default)]
    pub experiment: Option<ExperimentConfig>,
}

impl RunConfig {
    /// Reads a config and resolves its paths against the config's directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let mut cfg: RunConfig = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.lexicon);
        fix(&mut cfg.out_dir);
        cfg.backends.masked.as_mut().map(fix);
        cfg.backends.causal.as_mut().map(fix);
        if let Some(f) = cfg.forge.as_mut() {
            f.corpus.as_mut().map(fix);
        }
        if let Some(e) = cfg.experiment.as_mut() {
            fix(&mut e.controls);
            e.journal.as_mut().map(fix);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        let mut paths = vec![&self.lexicon];
        paths.extend(self.backends.masked.iter());
        paths.extend(self.backends.causal.iter());
        if let Some(f) = &self.forge {
            paths.extend(f.corpus.iter());
        }
        if let Some(e) = &self.experiment {
            paths.push(&e.controls);
            paths.extend(e.journal.iter());
        }
        for p in paths {
            if !p.exists() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        let needs_forge = !self.metrics.is_empty() || self.compare.is_some() || self.probe.is_some() || self.experiment.is_some();
        if needs_forge && self.forge.is_none() {
            return Err(Error::Config("later stages need a `forge` section".into()));
        }
        if self.compare.is_some() && self.metrics.is_empty() {
            return Err(Error::Config("`compare` needs at least one metric".into()));
        }
        if self.probe.is_some() && self.backends.masked.is_none() {
            return Err(Error::Config("`probe` needs a masked backend".into()));
        }
        self.required_conditions()?;
        let forge = self.forge.as_ref();
        for key in self.referenced_keys() {
            if let DatasetKey::Derived(d) = DatasetKey::parse(key)? {
                let available = if d.starts_with("subject-") {
                    forge.is_some_and(|f| f.subject_replacement)
                } else {
                    forge.is_some_and(|f| f.corpus.is_some())
                };
                if !available {
                    return Err(Error::Config(format!(
                        "`{d}` needs {} in the forge section",
                        if d.starts_with("subject-") { "`subject_replacement`" } else { "a `corpus`" }
                    )));
                }
            }
        }
        Ok(())
    }

    fn referenced_keys(&self) -> Vec<&str> {
        let mut keys = Vec::new();
        if let Some(plan) = &self.compare {
            for [a, b] in &plan.pairs {
                keys.push(a.as_str());
                keys.push(b.as_str());
            }
        }
        if let Some(p) = &self.probe {
            keys.push(p.dataset.as_str());
            keys.extend(p.gallery.iter().map(String::as_str));
        }
        keys
    }

    /// Every synthetic condition some stage refers to, canonical order.
    pub fn required_conditions(&self) -> Result<Vec<Condition>> {
        let mut set = BTreeSet::new();
        let add_key = |key: &str, set: &mut BTreeSet<Condition>| -> Result<()> {
            match DatasetKey::parse(key)? {
                DatasetKey::Synthetic(c) => {
                    set.insert(c);
                }
                DatasetKey::Derived(_) => {}
            }
            Ok(())
        };
        if let Some(f) = &self.forge {
            for c in &f.conditions {
                add_key(c, &mut set)?;
            }
        }
        if let Some(plan) = &self.compare {
            for [a, b] in &plan.pairs {
                add_key(a, &mut set)?;
                add_key(b, &mut set)?;
            }
            for s in &plan.sweeps {
                for c in sweep_family(&s.kind)? {
                    set.insert(c);
                }
            }
            for f in &plan.flips {
                let (ka, na) = numeric_condition(&f.a)?;
                let (kb, nb) = numeric_condition(&f.b)?;
                for (k, n) in [(ka, na), (ka, nb), (kb, na), (kb, nb)] {
                    set.insert(Condition::new(k, Some(n), None)?);
                }
            }
        }
        if let Some(p) = &self.probe {
            add_key(&p.dataset, &mut set)?;
            for g in &p.gallery {
                add_key(g, &mut set)?;
            }
            if let Some(kind) = &p.numerals {
                set.extend(sweep_family(kind)?);
            }
        }
        let mut out: Vec<Condition> = set.into_iter().collect();
        out.sort_by(Condition::canonical_cmp);
        Ok(out)
    }
}

fn numeric_condition(s: &str) -> Result<(ConditionKind, u32)> {
    let c: Condition = s.parse()?;
    match (c.kind.is_numeric(), c.n, c.n2) {
        (true, Some(n), None) => Ok((c.kind, n)),
        _ => Err(Error::Config(format!("`{s}` is not a single-numeral quantifier"))),
    }
}

fn sweep_kind(kind: &str) -> Result<ConditionKind> {
    match ConditionKind::from_slug(kind) {
        Some(k) if k.is_numeric() && k != ConditionKind::Between => Ok(k),
        _ => Err(Error::Config(format!("`{kind}` cannot be swept"))),
    }
}

fn sweep_family(kind: &str) -> Result<Vec<Condition>> {
    let k = sweep_kind(kind)?;
    Ok((2..=90).filter(|&n| is_sweep_numeral(n)).map(|n| Condition::numeric(k, n)).collect())
}

/// Names a dataset: a synthetic condition, or one of the derived sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetKey {
    Synthetic(Condition),
    Derived(&'static str),
}

pub const DERIVED_KEYS: [&str; 6] = [
    "subject-no",
    "subject-some",
    "natural-neg",
    "natural-aff",
    "natural-no-pron",
    "natural-some-pron",
];

impl DatasetKey {
    pub fn parse(key: &str) -> Result<DatasetKey> {
        if let Some(d) = DERIVED_KEYS.iter().find(|d| **d == key) {
            return Ok(DatasetKey::Derived(d));
        }
        let c: Condition = key
            .parse()
            .map_err(|e| Error::Config(format!("unknown dataset `{key}`: {e}")))?;
        if c.kind.is_pronoun() {
            return Err(Error::Config(format!(
                "`{key}`: pronoun datasets are `subject-no`/`subject-some` or `natural-*-pron`"
            )));
        }
        Ok(DatasetKey::Synthetic(c))
    }

    pub fn stem(&self) -> String {
        match self {
            DatasetKey::Synthetic(c) => c.to_string().replace(':', "-"),
            DatasetKey::Derived(d) => d.to_string(),
        }
    }
}

pub fn dataset_rel(key: &str) -> Result<String> {
    Ok(format!("forge/{}.jsonl", DatasetKey::parse(key)?.stem()))
}

pub fn score_rel(metric: MetricKind, key: &str) -> Result<String> {
    Ok(format!("scores/{}/{}.jsonl", metric.name(), DatasetKey::parse(key)?.stem()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    /// Hash of the stage's configuration and inputs.
    pub key: String,
    pub millis: u64,
    /// Output path (relative to the run directory) → sha256.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub seed: u64,
    pub config_sha256: String,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    /// The stage record holding `rel`, if any.
    pub fn artifact(&self, rel: &str) -> Option<&str> {
        self.stages.iter().find_map(|s| s.outputs.get(rel).map(String::as_str))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    Skipped,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
    pub stages: Vec<(String, StageStatus)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceEntry {
    pub a: String,
    pub b: String,
    pub metric: MetricKind,
    pub dataset_hash: String,
    pub backend: String,
    pub result: DominanceResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub dataset_hash: String,
    pub backend: String,
    pub curve: SweepCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipEntry {
    pub a: String,
    pub b: String,
    pub dataset_hash: String,
    pub backend: String,
    pub report: FlipReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeHeads {
    pub dataset: String,
    pub backend: String,
    pub search: HeadSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumeralEntry {
    pub kind: String,
    pub layer: usize,
    pub head: usize,
    pub ratios: Vec<NumeralRatio>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    dir: PathBuf,
    previous: Option<RunManifest>,
    masked: Option<Box<dyn Backend>>,
    causal: Option<Box<dyn Backend>>,
}

/// Collects the files a stage writes.
struct Outputs<'a> {
    dir: &'a Path,
    files: BTreeMap<String, String>,
}

impl Outputs<'_> {
    fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    fn bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.path(rel), bytes)?;
        self.files.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> Result<()> {
        self.bytes(rel, &to_json_bytes(value))
    }

    /// Records a file written by a helper.
    fn record(&mut self, rel: &str) -> Result<()> {
        let sha = sha256_file(&self.path(rel))?;
        self.files.insert(rel.to_string(), sha);
        Ok(())
    }

    fn dataset(&mut self, rel: &str, sentences: &[ProbeSentence], lineage: &str, generator: &str) -> Result<()> {
        write_dataset(&self.path(rel), sentences, lineage, generator)?;
        self.record(rel)?;
        self.record(&format!("{rel}.meta.json"))
    }

    fn scores(&mut self, rel: &str, table: &ScoreTable) -> Result<()> {
        write_scores(&self.path(rel), table)?;
        self.record(rel)
    }
}

impl Ctx<'_> {
    fn backend(&mut self, masked: bool) -> Result<&dyn Backend> {
        let (slot, path, what) = if masked {
            (&mut self.masked, &self.cfg.backends.masked, "masked")
        } else {
            (&mut self.causal, &self.cfg.backends.causal, "causal")
        };
        if slot.is_none() {
            let path = path
                .as_ref()
                .ok_or_else(|| Error::Config(format!("no {what} backend configured")))?;
            *slot = Some(load_backend(path)?);
        }
        Ok(slot.as_deref().expect("just loaded"))
    }

    fn read(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    /// Runs `body` unless the previous manifest shows the same key with
    /// intact outputs.
    fn stage(
        &mut self,
        name: &str,
        key: String,
        body: impl FnOnce(&mut Ctx, &mut Outputs) -> Result<()>,
    ) -> Result<(StageRecord, StageStatus)> {
        if let Some(prev) = self.previous.as_ref().and_then(|m| m.stage(name)) {
            if prev.key == key {
                let mut intact = true;
                for (rel, sha) in &prev.outputs {
                    let path = self.dir.join(rel);
                    if !path.exists() {
                        intact = false;
                        continue;
                    }
                    let found = sha256_file(&path)?;
                    if &found != sha {
                        return Err(Error::Stale {
                            path,
                            expected: sha.clone(),
                            found,
                        }
                        .in_stage(name));
                    }
                }
                if intact {
                    return Ok((prev.clone(), StageStatus::Skipped));
                }
            }
        }
        let start = Instant::now();
        let dir = self.dir.clone();
        let mut out = Outputs {
            dir: &dir,
            files: BTreeMap::new(),
        };
        body(self, &mut out).map_err(|e| e.in_stage(name))?;
        Ok((
            StageRecord {
                name: name.to_string(),
                key,
                millis: start.elapsed().as_millis() as u64,
                outputs: out.files,
            },
            StageStatus::Ran,
        ))
    }
}

fn stage_key(name: &str, seed: u64, section: serde_json::Value, inputs: &BTreeMap<String, String>) -> String {
    let doc = json!({
        "stage": name,
        "tool": env!("CARGO_PKG_VERSION"),
        "generator": GENERATOR_VERSION,
        "miner": MINER_VERSION,
        "seed": seed,
        "section": section,
        "inputs": inputs,
    });
    sha256_hex(&serde_json::to_vec(&doc).expect("key document serializes"))
}

fn file_input(map: &mut BTreeMap<String, String>, label: &str, path: &Path) -> Result<()> {
    map.insert(label.to_string(), sha256_file(path)?);
    Ok(())
}

fn upstream(map: &mut BTreeMap<String, String>, record: &StageRecord) {
    for (rel, sha) in &record.outputs {
        map.insert(format!("{}:{rel}", record.name), sha.clone());
    }
}

fn section<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("config section serializes")
}

/// Executes a run. `seed` overrides the config seed.
pub fn run(config_path: &Path, seed: Option<u64>) -> Result<RunOutcome> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    run_config(&cfg)
}

pub fn run_config(cfg: &RunConfig) -> Result<RunOutcome> {
    let dir = cfg.out_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let previous = if manifest_path.exists() {
        Some(read_json::<RunManifest>(&manifest_path)?)
    } else {
        None
    };
    let mut ctx = Ctx {
        cfg,
        dir,
        previous,
        masked: None,
        causal: None,
    };
    let mut records = Vec::new();
    let mut statuses = Vec::new();
    let mut push = |(r, s): (StageRecord, StageStatus), records: &mut Vec<StageRecord>| {
        statuses.push((r.name.clone(), s));
        records.push(r);
    };

    let mut backend_inputs = BTreeMap::new();
    if let Some(p) = &cfg.backends.masked {
        file_input(&mut backend_inputs, "masked", p)?;
    }
    if let Some(p) = &cfg.backends.causal {
        file_input(&mut backend_inputs, "causal", p)?;
    }

    let Some(forge) = &cfg.forge else {
        return finish(ctx, records, statuses, &manifest_path);
    };
    let conditions = cfg.required_conditions()?;
    let mut inputs = backend_inputs.clone();
    file_input(&mut inputs, "lexicon", &cfg.lexicon)?;
    if let Some(c) = &forge.corpus {
        file_input(&mut inputs, "corpus", c)?;
    }
    let cond_names: Vec<String> = conditions.iter().map(|c| c.to_string()).collect();
    let key = stage_key("forge", cfg.seed, json!({ "forge": section(forge), "conditions": cond_names }), &inputs);
    let forge_rec = ctx.stage("forge", key, |ctx, out| forge_stage(ctx, out, forge, &conditions))?;
    push(forge_rec.clone(), &mut records);
    let forge_rec = forge_rec.0;

    let score_rec = if cfg.metrics.is_empty() {
        None
    } else {
        let mut inputs = backend_inputs.clone();
        upstream(&mut inputs, &forge_rec);
        let key = stage_key("score", cfg.seed, section(&cfg.metrics), &inputs);
        let datasets: Vec<String> = forge_rec
            .outputs
            .keys()
            .filter(|r| r.ends_with(".jsonl"))
            .cloned()
            .collect();
        let r = ctx.stage("score", key, |ctx, out| score_stage(ctx, out, &datasets))?;
        push(r.clone(), &mut records);
        Some(r.0)
    };

    if let (Some(plan), Some(score_rec)) = (&cfg.compare, &score_rec) {
        let mut inputs = BTreeMap::new();
        upstream(&mut inputs, score_rec);
        let key = stage_key("compare", cfg.seed, section(plan), &inputs);
        let r = ctx.stage("compare", key, |ctx, out| compare_stage(ctx, out, plan))?;
        push(r, &mut records);
    }

    if let Some(probe) = &cfg.probe {
        let mut inputs = backend_inputs.clone();
        upstream(&mut inputs, &forge_rec);
        let key = stage_key("probe", cfg.seed, section(probe), &inputs);
        let r = ctx.stage("probe", key, |ctx, out| probe_stage(ctx, out, probe))?;
        push(r, &mut records);
    }

    if let Some(exp) = &cfg.experiment {
        let mut inputs = BTreeMap::new();
        upstream(&mut inputs, &forge_rec);
        file_input(&mut inputs, "lexicon", &cfg.lexicon)?;
        file_input(&mut inputs, "controls", &exp.controls)?;
        if let Some(j) = &exp.journal {
            file_input(&mut inputs, "journal", j)?;
        }
        let key = stage_key("experiment", cfg.seed, section(exp), &inputs);
        let r = ctx.stage("experiment", key, |ctx, out| experiment_stage(ctx, out, exp))?;
        push(r, &mut records);
    }

    finish(ctx, records, statuses, &manifest_path)
}

fn finish(
    ctx: Ctx,
    stages: Vec<StageRecord>,
    statuses: Vec<(String, StageStatus)>,
    manifest_path: &Path,
) -> Result<RunOutcome> {
    let manifest = RunManifest {
        version: CONFIG_VERSION,
        seed: ctx.cfg.seed,
        config_sha256: sha256_hex(&serde_json::to_vec(ctx.cfg).expect("config serializes")),
        stages,
    };
    write_json(manifest_path, &manifest)?;
    Ok(RunOutcome {
        manifest,
        manifest_path: manifest_path.to_path_buf(),
        stages: statuses,
    })
}

fn load_lexicon(cfg: &RunConfig, forge: &ForgeConfig) -> Result<Lexicon> {
    let lex = read_lexicon(&cfg.lexicon)?;
    Ok(match (forge.nouns, forge.verbs) {
        (None, None) => lex,
        (n, v) => lex.capped(n.unwrap_or(lex.nouns.len()), v.unwrap_or(lex.verbs.len())),
    })
}

/// Interleaves each with-any sentence with its without-any variant.
fn with_variants(sentences: Vec<ProbeSentence>) -> Vec<ProbeSentence> {
    let mut out = Vec::with_capacity(sentences.len() * 2);
    for s in sentences {
        let without = s.without_any().ok();
        out.push(s);
        out.extend(without);
    }
    out
}

fn forge_stage(ctx: &mut Ctx, out: &mut Outputs, forge: &ForgeConfig, conditions: &[Condition]) -> Result<()> {
    let lex = load_lexicon(ctx.cfg, forge)?;
    let patterns = generate_base_patterns(&lex)?;
    let core: Vec<SentencePattern> = if forge.core_size >= patterns.len() {
        patterns
    } else {
        let backend = ctx.backend(false)?;
        scoring::select_core(backend, &lex, &patterns, forge.core_size)?
    };
    out.json("forge/core.json", &core)?;
    let ids: Vec<u32> = core.iter().map(|p| p.id).collect();
    let lineage = lineage_hash(&lex, GENERATOR_VERSION, &serde_json::to_string(&ids).expect("ids serialize"));

    for c in conditions {
        let sentences = core
            .iter()
            .map(|p| realize_condition(&lex, p, c))
            .collect::<npiprobe_core::Result<Vec<_>>>()?;
        out.dataset(&dataset_rel(&c.to_string())?, &with_variants(sentences), &lineage, GENERATOR_VERSION)?;
    }
    if forge.subject_replacement {
        for (key, pol) in [("subject-no", Polarity::No), ("subject-some", Polarity::Some)] {
            let sentences = derive_subject_replacement(&lex, &core, pol)?;
            out.dataset(&dataset_rel(key)?, &with_variants(sentences), &lineage, GENERATOR_VERSION)?;
        }
    }
    if let Some(corpus) = &forge.corpus {
        let text = read_text(corpus)?;
        let mined_lineage = sha256_hex(format!("{}\0{MINER_VERSION}", sha256_hex(text.as_bytes())).as_bytes());
        // past-tense lookups use the whole lexicon, not the capped one
        let full = read_lexicon(&ctx.cfg.lexicon)?;
        let neg = mine_negation_pairs(&text, Some(&full));
        let nobody = mine_nobody_pairs(&text);
        out.json("forge/mined.json", &json!({ "negation": &neg, "nobody": &nobody }))?;
        for (report, keys) in [(&neg, ["natural-neg", "natural-aff"]), (&nobody, ["natural-no-pron", "natural-some-pron"])] {
            let (negative, positive) = pairs_to_datasets(&report.pairs);
            out.dataset(&dataset_rel(keys[0])?, &with_variants(negative), &mined_lineage, MINER_VERSION)?;
            out.dataset(&dataset_rel(keys[1])?, &with_variants(positive), &mined_lineage, MINER_VERSION)?;
        }
    }
    Ok(())
}

fn needs_masked(metric: MetricKind) -> bool {
    metric != MetricKind::GptPplDiff
}

fn score_stage(ctx: &mut Ctx, out: &mut Outputs, datasets: &[String]) -> Result<()> {
    for &metric in &ctx.cfg.metrics.clone() {
        for rel in datasets {
            let (sentences, lineage) = read_dataset(&ctx.read(rel))?;
            let stem = rel.trim_start_matches("forge/");
            let backend = ctx.backend(needs_masked(metric))?;
            let table = scoring::score_dataset(backend, &sentences, &lineage, metric)?;
            out.scores(&format!("scores/{}/{stem}", metric.name()), &table)?;
        }
    }
    Ok(())
}

fn load_table(ctx: &Ctx, metric: MetricKind, key: &str) -> Result<ScoreTable> {
    let rel = score_rel(metric, key)?;
    let path = ctx.read(&rel);
    if !path.exists() {
        return Err(Error::MissingArtifact(rel));
    }
    read_scores(&path)
}

fn compare_stage(ctx: &mut Ctx, out: &mut Outputs, plan: &ComparePlan) -> Result<()> {
    let metrics = ctx.cfg.metrics.clone();
    let mut dom = Vec::new();
    for metric in &metrics {
        for [a, b] in &plan.pairs {
            let ta = load_table(ctx, *metric, a)?;
            let tb = load_table(ctx, *metric, b)?;
            dom.push(DominanceEntry {
                a: a.clone(),
                b: b.clone(),
                metric: *metric,
                dataset_hash: ta.header.dataset_hash.clone(),
                backend: ta.header.backend.name.clone(),
                result: dominance(&ta, &tb)?,
            });
        }
    }
    out.json("compare/dominance.json", &dom)?;

    let mut sweeps = Vec::new();
    for metric in &metrics {
        for spec in &plan.sweeps {
            let mut tables = BTreeMap::new();
            for c in sweep_family(&spec.kind)? {
                tables.insert(c.n.expect("numeric"), load_table(ctx, *metric, &c.to_string())?);
            }
            let first = tables.values().next().expect("sweep family is non-empty");
            let (dataset_hash, backend) = (first.header.dataset_hash.clone(), first.header.backend.name.clone());
            let curve = match spec.mode {
                SweepMode::VsBase => sweep_vs_base(&tables, spec.base.unwrap_or(DEFAULT_BASE))?,
                SweepMode::Gap => sweep_gap(&tables)?,
            };
            sweeps.push(SweepEntry {
                dataset_hash,
                backend,
                curve,
            });
        }
    }
    out.json("compare/sweeps.json", &sweeps)?;

    let mut flips = Vec::new();
    for metric in &metrics {
        for f in &plan.flips {
            let (ka, na) = numeric_condition(&f.a)?;
            let (kb, nb) = numeric_condition(&f.b)?;
            let mut tables = BTreeMap::new();
            for (k, n) in [(ka, na), (ka, nb), (kb, na), (kb, nb)] {
                let c = Condition::new(k, Some(n), None)?;
                tables.insert(c, load_table(ctx, *metric, &c.to_string())?);
            }
            let first = tables.values().next().expect("four tables");
            let (dataset_hash, backend) = (first.header.dataset_hash.clone(), first.header.backend.name.clone());
            flips.push(FlipEntry {
                a: f.a.clone(),
                b: f.b.clone(),
                dataset_hash,
                backend,
                report: flip_probe(&tables, ka, na, kb, nb)?,
            });
        }
    }
    out.json("compare/flips.json", &flips)?;
    Ok(())
}

fn with_any(path: &Path) -> Result<Vec<ProbeSentence>> {
    let (sentences, _) = read_dataset(path)?;
    Ok(sentences.into_iter().filter(|s| s.variant == Variant::WithAny).collect())
}

fn probe_stage(ctx: &mut Ctx, out: &mut Outputs, probe: &ProbeConfig) -> Result<()> {
    let searched = with_any(&ctx.read(&dataset_rel(&probe.dataset)?))?;
    let mut galleries = Vec::new();
    for key in &probe.gallery {
        galleries.push(with_any(&ctx.read(&dataset_rel(key)?))?);
    }
    let mut numeral_sets = Vec::new();
    if let Some(kind) = &probe.numerals {
        for c in sweep_family(kind)? {
            numeral_sets.extend(with_any(&ctx.read(&dataset_rel(&c.to_string())?))?);
        }
    }
    let backend = ctx.backend(true)?;
    let search = head_search(backend, &searched)?;
    let (layer, head) = match (probe.layer, probe.head) {
        (Some(l), Some(h)) => (l, h),
        _ => {
            let top = search.profiles.first().expect("a model has at least one head");
            (top.layer, top.head)
        }
    };
    let maps = galleries
        .iter()
        .flat_map(|g| g.iter().take(probe.gallery_size))
        .map(|s| saliency(backend, s, layer, head))
        .collect::<npiprobe_core::Result<Vec<SaliencyMap>>>()?;
    let numerals = match &probe.numerals {
        Some(kind) => Some(NumeralEntry {
            kind: kind.clone(),
            layer,
            head,
            ratios: numeral_ratio(backend, &numeral_sets, layer, head)?,
        }),
        None => None,
    };
    out.json(
        "probe/heads.json",
        &ProbeHeads {
            dataset: probe.dataset.clone(),
            backend: backend.info().name.clone(),
            search,
        },
    )?;
    out.json("probe/saliency.json", &maps)?;
    if let Some(n) = numerals {
        out.json("probe/numerals.json", &n)?;
    }
    Ok(())
}

fn experiment_stage(ctx: &mut Ctx, out: &mut Outputs, exp: &ExperimentConfig) -> Result<()> {
    let forge = ctx.cfg.forge.as_ref().expect("validated");
    let lex = load_lexicon(ctx.cfg, forge)?;
    let core: Vec<SentencePattern> = read_json(&ctx.read("forge/core.json"))?;
    let controls = read_controls(&exp.controls)?;
    let pool = sample_items(&lex, &core, &design_conditions(), exp.n_patterns, ctx.cfg.seed, &controls)?;
    out.json("experiment/pool.json", &pool)?;
    if let Some(journal) = &exp.journal {
        let experiment = replay(pool, journal)?;
        out.json("experiment/analysis.json", &analyze(&experiment, exp.alternative))?;
        out.json("experiment/sessions.json", &session_summaries(&experiment))?;
    }
    Ok(())
}
