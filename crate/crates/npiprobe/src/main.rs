use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use npiprobe::error::{Error, Result};
use npiprobe::files::{
    jsonl_bytes, lineage_hash, read_controls, read_dataset, read_json, read_lexicon, read_scores, read_text,
    sha256_hex, to_json_bytes, write_atomic, write_dataset, write_json, write_scores,
};
use npiprobe::journal::{replay, Service, ServiceOptions};
use npiprobe::loader::load_backend;
use npiprobe::pipeline;
use npiprobe::report;
use npiprobe::scoring;
use npiprobe::server::{self, AppState};
use npiprobe_core::attention::{head_search, render, saliency, RenderFormat};
use npiprobe_core::contrast::{
    binomial_test_with, dominance, flip_probe, sweep_gap, sweep_vs_base, Alternative, DEFAULT_BASE,
};
use npiprobe_core::experiment::{analyze, design_conditions, sample_items, session_summaries, ItemPool};
use npiprobe_core::forge::{
    derive_subject_replacement, generate_base_patterns, mine_negation_pairs, mine_nobody_pairs, pairs_to_datasets,
    pattern_count, realize_base, realize_condition, Condition, Lexicon, Polarity, ProbeSentence, SentencePattern,
    Variant, GENERATOR_VERSION, MINER_VERSION,
};
use npiprobe_core::metrics::{MetricKind, ScoreTable};

#[derive(Parser)]
#[command(
    name = "npiprobe",
    version,
    about = "NPI acceptability probes for language models",
    after_help = "Weights and tokenizers named in a manifest are looked up beside the manifest, then in $NPIPROBE_MODEL_CACHE."
)]
struct Cli {
    /// Overrides every seed, including the one in a run config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dataset construction.
    #[command(subcommand)]
    Forge(Forge),
    /// Per-sentence acceptability scores.
    #[command(subcommand)]
    Metrics(Metrics),
    /// Pairwise dominance of two score files.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Dominance across the numeral range of one quantifier.
    Sweep {
        #[arg(long, value_enum)]
        mode: Mode,
        /// Directory of score files, one per numeral.
        #[arg(long)]
        tables: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BASE)]
        base: u32,
    },
    /// Forward and numeral-exchanged dominance of two quantifiers.
    Flip {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        tables: PathBuf,
    },
    /// Exact binomial test.
    #[command(subcommand)]
    Stats(Stats),
    /// Attention heads and saliency maps.
    #[command(subcommand)]
    Probe(Probe),
    /// Experiment service over HTTP.
    Serve {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        journal: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "NPIPROBE_ADMIN_TOKEN")]
        admin_token: Option<String>,
        /// Participant interface assets served at `/`.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        snapshot_every: u64,
    },
    /// Exclusion and binomial analysis of a journal.
    Analyze {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        journal: PathBuf,
        #[arg(long, value_enum, default_value_t = Alt::TwoSided)]
        alternative: Alt,
    },
    /// Runs the stages declared in a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// CSV, SVG and HTML for a finished run.
    Report {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Forge {
    /// Base patterns (or just their count).
    Generate {
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        nouns: Option<usize>,
        #[arg(long)]
        verbs: Option<usize>,
        #[arg(long)]
        count_only: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lowest-perplexity patterns under a causal backend.
    SelectCore {
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        backend: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        nouns: Option<usize>,
        #[arg(long)]
        verbs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// One condition over the core patterns.
    Realize {
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        core: PathBuf,
        #[arg(long)]
        condition: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pronoun-subject datasets (`no` or `some`).
    Subject {
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        core: PathBuf,
        #[arg(long, value_enum)]
        polarity: Pol,
        #[arg(long)]
        out: PathBuf,
    },
    /// Minimal pairs from a line-per-sentence corpus.
    Mine {
        #[arg(long, value_enum)]
        kind: MineKind,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Writes `<prefix>-negative.jsonl` and `<prefix>-positive.jsonl`.
        #[arg(long)]
        out_prefix: Option<PathBuf>,
    },
    /// Item pool for the forced-choice experiment.
    Pool {
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        core: PathBuf,
        #[arg(long)]
        controls: PathBuf,
        #[arg(long, default_value_t = 50)]
        n_patterns: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum Metrics {
    /// Scores a dataset with `bert-prob`, `bert-rank` or `gpt-ppl-diff`.
    Score {
        #[arg(long)]
        backend: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        metric: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum Stats {
    /// p-value and Clopper-Pearson interval for k successes in n trials.
    Binom {
        #[arg(long)]
        k: u64,
        #[arg(long)]
        n: u64,
        #[arg(long, value_enum, default_value_t = Alt::TwoSided)]
        alternative: Alt,
    },
}

#[derive(Subcommand)]
enum Probe {
    /// Heads ranked by attention from any to the licensor.
    Heads {
        #[arg(long)]
        backend: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Token saliency of one sentence at one head (1-based).
    Saliency {
        #[arg(long)]
        backend: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        sentence_id: u64,
        #[arg(long)]
        layer: usize,
        #[arg(long)]
        head: usize,
        #[arg(long, value_enum, default_value_t = Format::Html)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    VsBase,
    Gap,
}

#[derive(Clone, Copy, ValueEnum)]
enum Alt {
    TwoSided,
    Greater,
    Less,
}

impl From<Alt> for Alternative {
    fn from(a: Alt) -> Alternative {
        match a {
            Alt::TwoSided => Alternative::TwoSided,
            Alt::Greater => Alternative::Greater,
            Alt::Less => Alternative::Less,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Pol {
    No,
    Some,
}

#[derive(Clone, Copy, ValueEnum)]
enum MineKind {
    Neg,
    Nobody,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Html,
    Ansi,
}

fn print<T: Serialize + ?Sized>(value: &T) {
    let bytes = to_json_bytes(value);
    print!("{}", String::from_utf8_lossy(&bytes));
}

fn lexicon(path: &Path, nouns: Option<usize>, verbs: Option<usize>) -> Result<Lexicon> {
    let lex = read_lexicon(path)?;
    Ok(match (nouns, verbs) {
        (None, None) => lex,
        (n, v) => lex.capped(n.unwrap_or(lex.nouns.len()), v.unwrap_or(lex.verbs.len())),
    })
}

fn core_lineage(lex: &Lexicon, core: &[SentencePattern]) -> String {
    let ids: Vec<u32> = core.iter().map(|p| p.id).collect();
    lineage_hash(lex, GENERATOR_VERSION, &serde_json::to_string(&ids).expect("ids serialize"))
}

fn with_variants(sentences: Vec<ProbeSentence>) -> Vec<ProbeSentence> {
    let mut out = Vec::with_capacity(sentences.len() * 2);
    for s in sentences {
        let without = s.without_any().ok();
        out.push(s);
        out.extend(without);
    }
    out
}

fn metric(name: &str) -> Result<MetricKind> {
    MetricKind::from_name(name).ok_or_else(|| {
        Error::Config(format!(
            "unknown metric `{name}` (expected bert-prob, bert-rank or gpt-ppl-diff)"
        ))
    })
}

/// Every score file in `dir`, sorted by file name.
fn tables_in(dir: &Path) -> Result<Vec<ScoreTable>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_scores(p)).collect()
}

fn keyed_by_condition(dir: &Path) -> Result<BTreeMap<Condition, ScoreTable>> {
    let mut out = BTreeMap::new();
    for t in tables_in(dir)? {
        if let Some(c) = t.condition() {
            out.insert(c, t);
        }
    }
    Ok(out)
}

fn forge(cmd: Forge, seed: Option<u64>) -> Result<()> {
    match cmd {
        Forge::Generate {
            lexicon: path,
            nouns,
            verbs,
            count_only,
            out,
        } => {
            let lex = lexicon(&path, nouns, verbs)?;
            if count_only {
                print(&json!({ "patterns": pattern_count(lex.nouns.len(), lex.verbs.len()) }));
                return Ok(());
            }
            let patterns = generate_base_patterns(&lex)?;
            let rows: Vec<_> = patterns
                .iter()
                .map(|p| json!({ "id": p.id, "subject": p.subject, "verb": p.verb, "object": p.object, "text": realize_base(&lex, p) }))
                .collect();
            match out {
                Some(out) => {
                    write_atomic(&out, &jsonl_bytes(&rows))?;
                    eprintln!("{} patterns → {}", rows.len(), out.display());
                }
                None => print!("{}", String::from_utf8_lossy(&jsonl_bytes(&rows))),
            }
        }
        Forge::SelectCore {
            lexicon: path,
            backend,
            k,
            nouns,
            verbs,
            out,
        } => {
            let lex = lexicon(&path, nouns, verbs)?;
            let backend = load_backend(&backend)?;
            let patterns = generate_base_patterns(&lex)?;
            let core = scoring::select_core(backend.as_ref(), &lex, &patterns, k)?;
            write_json(&out, &core)?;
            eprintln!("{} of {} patterns → {}", core.len(), patterns.len(), out.display());
        }
        Forge::Realize {
            lexicon: path,
            core,
            condition,
            out,
        } => {
            let lex = read_lexicon(&path)?;
            let core: Vec<SentencePattern> = read_json(&core)?;
            let c: Condition = condition.parse()?;
            let sentences = core
                .iter()
                .map(|p| realize_condition(&lex, p, &c))
                .collect::<npiprobe_core::Result<Vec<_>>>()?;
            let meta = write_dataset(&out, &with_variants(sentences), &core_lineage(&lex, &core), GENERATOR_VERSION)?;
            print(&meta);
        }
        Forge::Subject {
            lexicon: path,
            core,
            polarity,
            out,
        } => {
            let lex = read_lexicon(&path)?;
            let core: Vec<SentencePattern> = read_json(&core)?;
            let pol = match polarity {
                Pol::No => Polarity::No,
                Pol::Some => Polarity::Some,
            };
            let sentences = derive_subject_replacement(&lex, &core, pol)?;
            let meta = write_dataset(&out, &with_variants(sentences), &core_lineage(&lex, &core), GENERATOR_VERSION)?;
            print(&meta);
        }
        Forge::Mine {
            kind,
            corpus,
            lexicon: lex_path,
            out_prefix,
        } => {
            let text = read_text(&corpus)?;
            let lex = lex_path.as_deref().map(read_lexicon).transpose()?;
            let report = match kind {
                MineKind::Neg => mine_negation_pairs(&text, lex.as_ref()),
                MineKind::Nobody => mine_nobody_pairs(&text),
            };
            if let Some(prefix) = out_prefix {
                let lineage = sha256_hex(format!("{}\0{MINER_VERSION}", sha256_hex(text.as_bytes())).as_bytes());
                let (neg, pos) = pairs_to_datasets(&report.pairs);
                let named = |suffix: &str| {
                    let mut p = prefix.as_os_str().to_owned();
                    p.push(format!("-{suffix}.jsonl"));
                    PathBuf::from(p)
                };
                write_dataset(&named("negative"), &with_variants(neg), &lineage, MINER_VERSION)?;
                write_dataset(&named("positive"), &with_variants(pos), &lineage, MINER_VERSION)?;
            }
            print(&report);
        }
        Forge::Pool {
            lexicon: path,
            core,
            controls,
            n_patterns,
            out,
        } => {
            let lex = read_lexicon(&path)?;
            let core: Vec<SentencePattern> = read_json(&core)?;
            let controls = read_controls(&controls)?;
            let pool = sample_items(&lex, &core, &design_conditions(), n_patterns, seed.unwrap_or(0), &controls)?;
            write_json(&out, &pool)?;
            eprintln!("{} test items → {}", pool.tests.len(), out.display());
        }
    }
    Ok(())
}

fn probe(cmd: Probe) -> Result<()> {
    match cmd {
        Probe::Heads { backend, dataset, top } => {
            let backend = load_backend(&backend)?;
            let (sentences, _) = read_dataset(&dataset)?;
            let with_any: Vec<_> = sentences.into_iter().filter(|s| s.variant == Variant::WithAny).collect();
            let mut search = head_search(backend.as_ref(), &with_any)?;
            search.profiles.truncate(top);
            print(&search);
        }
        Probe::Saliency {
            backend,
            dataset,
            sentence_id,
            layer,
            head,
            format,
            out,
        } => {
            let backend = load_backend(&backend)?;
            let (sentences, _) = read_dataset(&dataset)?;
            let s = sentences
                .iter()
                .find(|s| s.id == sentence_id && s.variant == Variant::WithAny)
                .ok_or_else(|| npiprobe_core::Error::NotFound(format!("sentence {sentence_id}")))?;
            let map = saliency(backend.as_ref(), s, layer, head)?;
            let text = render(
                &map,
                match format {
                    Format::Html => RenderFormat::Html,
                    Format::Ansi => RenderFormat::Ansi,
                },
            );
            match out {
                Some(out) => write_atomic(&out, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn serve(
    pool: &Path,
    journal: &Path,
    addr: SocketAddr,
    admin_token: Option<String>,
    static_dir: Option<PathBuf>,
    options: ServiceOptions,
) -> Result<()> {
    let pool: ItemPool = read_json(pool)?;
    let service = Service::open(pool, journal, options)?;
    let state = Arc::new(AppState {
        service: Mutex::new(service),
        admin_token,
        static_dir,
        alternative: Alternative::TwoSided,
    });
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::Config(format!("cannot start runtime: {e}")))?;
    rt.block_on(server::serve(state, addr))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Forge(f) => forge(f, cli.seed)?,
        Command::Metrics(Metrics::Score {
            backend,
            dataset,
            metric: name,
            out,
        }) => {
            let m = metric(&name)?;
            let backend = load_backend(&backend)?;
            let (sentences, lineage) = read_dataset(&dataset)?;
            let table = scoring::score_dataset(backend.as_ref(), &sentences, &lineage, m)?;
            write_scores(&out, &table)?;
            eprintln!("{} rows → {}", table.rows.len(), out.display());
        }
        Command::Compare { a, b } => print(&dominance(&read_scores(&a)?, &read_scores(&b)?)?),
        Command::Sweep { mode, tables, base } => {
            let mut by_numeral = BTreeMap::new();
            for t in tables_in(&tables)? {
                let n = t
                    .condition()
                    .and_then(|c| c.n)
                    .ok_or_else(|| Error::Config("sweep tables need one numeric condition each".into()))?;
                by_numeral.insert(n, t);
            }
            let curve = match mode {
                Mode::VsBase => sweep_vs_base(&by_numeral, base)?,
                Mode::Gap => sweep_gap(&by_numeral)?,
            };
            print(&curve);
        }
        Command::Flip { a, b, tables } => {
            let ca: Condition = a.parse()?;
            let cb: Condition = b.parse()?;
            let (Some(na), Some(nb)) = (ca.n, cb.n) else {
                return Err(Error::Config("flip needs numeric quantifiers such as at-least:2".into()));
            };
            print(&flip_probe(&keyed_by_condition(&tables)?, ca.kind, na, cb.kind, nb)?);
        }
        Command::Stats(Stats::Binom { k, n, alternative }) => print(&binomial_test_with(k, n, alternative.into())?),
        Command::Probe(p) => probe(p)?,
        Command::Serve {
            pool,
            journal,
            port,
            host,
            admin_token,
            static_dir,
            snapshot,
            snapshot_every,
        } => {
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| Error::Config(format!("bad address {host}:{port}: {e}")))?;
            let options = ServiceOptions {
                snapshot,
                snapshot_every,
                seed: cli.seed,
            };
            serve(&pool, &journal, addr, admin_token, static_dir, options)?;
        }
        Command::Analyze {
            pool,
            journal,
            alternative,
        } => {
            let pool: ItemPool = read_json(&pool)?;
            let exp = replay(pool, &journal)?;
            print(&json!({
                "sessions": session_summaries(&exp),
                "analysis": analyze(&exp, alternative.into()),
            }));
        }
        Command::Run { config } => {
            let outcome = pipeline::run(&config, cli.seed)?;
            for (name, status) in &outcome.stages {
                eprintln!("{name}: {}", if *status == pipeline::StageStatus::Ran { "ran" } else { "skipped" });
            }
            eprintln!("manifest → {}", outcome.manifest_path.display());
        }
        Command::Report { manifest, out } => {
            let index = report::report(&manifest, out.as_deref())?;
            print(&index);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}
