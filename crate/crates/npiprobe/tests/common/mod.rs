#![allow(dead_code)]

use std::path::{Path, PathBuf};

use serde_json::Value;

use npiprobe::files::{read_controls, read_lexicon};
use npiprobe::loader::load_backend;
use npiprobe_core::experiment::{design_conditions, sample_items, ItemPool};
use npiprobe_core::forge::{generate_base_patterns, Lexicon};
use npiprobe_core::Backend;

pub fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

pub fn lexicon() -> Lexicon {
    read_lexicon(&data("lexicon.json")).unwrap()
}

pub fn mock() -> Box<dyn Backend> {
    load_backend(&data("mock-planted.json")).unwrap()
}

/// A pool over the first nouns and verbs of the bundled lexicon.
pub fn pool(n_patterns: usize, seed: u64) -> ItemPool {
    let lex = lexicon().capped(8, 4);
    let core = generate_base_patterns(&lex).unwrap();
    let controls = read_controls(&data("controls.json")).unwrap();
    sample_items(&lex, &core, &design_conditions(), n_patterns, seed, &controls).unwrap()
}

/// Writes `config` into `dir` with data paths made absolute.
pub fn write_config(dir: &Path, mut config: Value) -> PathBuf {
    let abs = |v: &mut Value| {
        if let Some(s) = v.as_str() {
            *v = Value::String(data(s).to_string_lossy().into_owned());
        }
    };
    abs(&mut config["lexicon"]);
    if let Some(b) = config.get_mut("backends").and_then(Value::as_object_mut) {
        b.values_mut().for_each(abs);
    }
    if let Some(c) = config.pointer_mut("/forge/corpus") {
        abs(c);
    }
    if let Some(c) = config.pointer_mut("/experiment/controls") {
        abs(c);
    }
    let path = dir.join("run.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&config).unwrap()).unwrap();
    path
}
