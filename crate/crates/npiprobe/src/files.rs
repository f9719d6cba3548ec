//! On-disk formats: lexicon JSON, dataset and score JSON-lines, sidecar
//! metadata, and the hashing used for dataset lineage.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Number, Value};
use sha2::{Digest, Sha256};

use npiprobe_core::experiment::ControlSet;
use npiprobe_core::forge::{Lexicon, ProbeSentence};
use npiprobe_core::metrics::{ScoreHeader, ScoreRow, ScoreTable};

use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e))
}

pub fn to_json_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable value");
    out.push(b'\n');
    out
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &to_json_bytes(value))
}

/// Parses one JSON value per non-blank line; errors carry the 1-based line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e))?);
    }
    Ok(out)
}

pub fn jsonl_bytes<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("serializable value");
        out.push(b'\n');
    }
    out
}

pub fn read_lexicon(path: &Path) -> Result<Lexicon> {
    let lex: Lexicon = read_json(path)?;
    lex.validate()?;
    Ok(lex)
}

pub fn read_controls(path: &Path) -> Result<ControlSet> {
    read_json(path)
}

/// Lineage hash of a generated dataset family: the lexicon bytes (as
/// canonical JSON), the generator version and the generation parameters.
pub fn lineage_hash(lexicon: &Lexicon, generator: &str, params: &str) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(lexicon).expect("lexicon serializes"));
    h.update([0]);
    h.update(generator.as_bytes());
    h.update([0]);
    h.update(params.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// Shared by every dataset generated from the same lexicon and
    /// parameters; score tables inherit it.
    pub lineage: String,
    pub generator: String,
    pub name: String,
    pub sentences: usize,
    /// sha256 of the dataset file itself.
    pub content_sha256: String,
}

pub fn meta_path(dataset: &Path) -> PathBuf {
    let mut p = dataset.as_os_str().to_owned();
    p.push(".meta.json");
    PathBuf::from(p)
}

pub fn write_dataset(path: &Path, sentences: &[ProbeSentence], lineage: &str, generator: &str) -> Result<DatasetMeta> {
    let bytes = jsonl_bytes(sentences);
    write_atomic(path, &bytes)?;
    let meta = DatasetMeta {
        lineage: lineage.to_string(),
        generator: generator.to_string(),
        name: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        sentences: sentences.len(),
        content_sha256: sha256_hex(&bytes),
    };
    write_json(&meta_path(path), &meta)?;
    Ok(meta)
}

/// The sentences and their lineage hash. Without a sidecar the file's own
/// sha256 stands in, so only a table against itself will align.
pub fn read_dataset(path: &Path) -> Result<(Vec<ProbeSentence>, String)> {
    let sentences: Vec<ProbeSentence> = read_jsonl(path)?;
    let meta = meta_path(path);
    let lineage = if meta.exists() {
        read_json::<DatasetMeta>(&meta)?.lineage
    } else {
        sha256_file(path)?
    };
    Ok((sentences, lineage))
}

/// `v` rounded to 9 significant digits, as the shortest JSON number that
/// reads back to the rounded value.
pub fn nine_digits(v: f64) -> Value {
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    Number::from_f64(rounded).map(Value::Number).unwrap_or(Value::Null)
}

fn row_value(table: &ScoreTable, v: f64) -> Value {
    if table.metric().is_integer() {
        Value::Number(Number::from(v as u64))
    } else {
        nine_digits(v)
    }
}

pub fn score_bytes(table: &ScoreTable) -> Vec<u8> {
    let mut out = serde_json::to_vec(&table.header).expect("header serializes");
    out.push(b'\n');
    for r in &table.rows {
        let line = serde_json::json!({
            "id": r.id,
            "pattern_id": r.pattern_id,
            "condition": r.condition,
            "value": row_value(table, r.value),
        });
        serde_json::to_writer(&mut out, &line).expect("row serializes");
        out.push(b'\n');
    }
    out
}

pub fn write_scores(path: &Path, table: &ScoreTable) -> Result<()> {
    write_atomic(path, &score_bytes(table))
}

pub fn read_scores(path: &Path) -> Result<ScoreTable> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| Error::parse(path, 1, "missing header line"))?;
    let header: ScoreHeader = serde_json::from_str(first).map_err(|e| Error::parse(path, 1, e))?;
    let rows = lines
        .map(|(i, l)| serde_json::from_str::<ScoreRow>(l).map_err(|e| Error::parse(path, i + 1, e)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreTable { header, rows })
}
