//! Append-only JSON-lines journal of experiment events, periodic state
//! snapshots, and the single-writer service built on them.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use npiprobe_core::contrast::Alternative;
use npiprobe_core::experiment::{
    analyze, Choice, Event, Experiment, ExperimentState, ItemId, ItemPool, JudgmentAck, NextItem, Phase,
    PresentedItem, AnalysisRow,
};

use crate::error::{Error, Result};
use crate::files::{read_json, sha256_hex, to_json_bytes, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalLine {
    pub ts: u64,
    pub kind: String,
    pub session: String,
    pub payload: Value,
}

impl JournalLine {
    pub fn from_event(ts: u64, event: &Event) -> JournalLine {
        let mut v = serde_json::to_value(event).expect("event serializes");
        let payload = v.get_mut("payload").map(Value::take).unwrap_or(Value::Null);
        JournalLine {
            ts,
            kind: event.kind().to_string(),
            session: event.session().to_string(),
            payload,
        }
    }

    pub fn event(&self) -> std::result::Result<Event, serde_json::Error> {
        serde_json::from_value(serde_json::json!({ "kind": self.kind, "payload": self.payload }))
    }
}

/// Reads every complete line. A final line without its newline is a torn
/// write from a crash and is reported separately rather than parsed.
pub fn read_journal(path: &Path) -> Result<(Vec<(u64, Event)>, Option<u64>)> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), None)),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut reader = BufReader::new(file);
    let mut events = Vec::new();
    let mut offset = 0u64;
    let mut buf = String::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            return Ok((events, None));
        }
        line_no += 1;
        if !buf.ends_with('\n') {
            return Ok((events, Some(offset)));
        }
        offset += n as u64;
        if buf.trim().is_empty() {
            continue;
        }
        let line: JournalLine = serde_json::from_str(&buf).map_err(|e| Error::parse(path, line_no, e))?;
        let event = line.event().map_err(|e| Error::parse(path, line_no, e))?;
        events.push((line.ts, event));
    }
}

/// Rebuilds experiment state from a journal alone.
pub fn replay(pool: ItemPool, path: &Path) -> Result<Experiment> {
    let (events, _) = read_journal(path)?;
    let mut exp = Experiment::new(pool)?;
    for (ts, e) in &events {
        exp.apply(*ts, e)?;
    }
    Ok(exp)
}

pub struct Journal {
    path: PathBuf,
    file: File,
    lines: u64,
}

impl Journal {
    /// Opens for appending, dropping a torn final line if present.
    pub fn open(path: &Path) -> Result<(Journal, Vec<(u64, Event)>)> {
        let (events, torn) = read_journal(path)?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        if let Some(len) = torn {
            file.set_len(len).map_err(|e| Error::io(path, e))?;
        }
        let lines = events.len() as u64;
        Ok((
            Journal {
                path: path.to_path_buf(),
                file,
                lines,
            },
            events,
        ))
    }

    /// Appends and fsyncs; returns once the lines are durable.
    pub fn append(&mut self, ts: u64, events: &[Event]) -> Result<()> {
        if events.is_empty() {
            return Ok(());
        }
        let mut buf = Vec::new();
        for e in events {
            serde_json::to_writer(&mut buf, &JournalLine::from_event(ts, e)).expect("line serializes");
            buf.push(b'\n');
        }
        self.file.write_all(&buf).map_err(|e| Error::io(&self.path, e))?;
        self.file.sync_data().map_err(|e| Error::io(&self.path, e))?;
        self.lines += events.len() as u64;
        Ok(())
    }

    pub fn lines(&self) -> u64 {
        self.lines
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub pool_sha256: String,
    /// Journal lines already folded into `state`.
    pub journal_lines: u64,
    pub state: ExperimentState,
}

pub fn pool_sha256(pool: &ItemPool) -> String {
    sha256_hex(&to_json_bytes(pool))
}

#[derive(Debug, Clone, Default)]
pub struct ServiceOptions {
    pub snapshot: Option<PathBuf>,
    /// Events between snapshots; 0 disables periodic snapshots.
    pub snapshot_every: u64,
    /// Fixed seed for presentation order and session ids.
    pub seed: Option<u64>,
}

pub struct Service {
    exp: Experiment,
    journal: Journal,
    pool_sha256: String,
    options: ServiceOptions,
    since_snapshot: u64,
    rng: ChaCha8Rng,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl Service {
    /// Recovers from the snapshot (if any) plus the journal tail.
    pub fn open(pool: ItemPool, journal: &Path, options: ServiceOptions) -> Result<Service> {
        let pool_sha = pool_sha256(&pool);
        let (journal, events) = Journal::open(journal)?;
        let mut skip = 0usize;
        let mut exp = match options.snapshot.as_deref().filter(|p| p.exists()) {
            Some(path) => {
                let snap: Snapshot = read_json(path)?;
                if snap.pool_sha256 != pool_sha {
                    return Err(Error::Config(format!(
                        "snapshot {} was taken over a different item pool",
                        path.display()
                    )));
                }
                if snap.journal_lines as usize > events.len() {
                    return Err(Error::Config(format!(
                        "snapshot {} covers {} journal lines but the journal has {}",
                        path.display(),
                        snap.journal_lines,
                        events.len()
                    )));
                }
                skip = snap.journal_lines as usize;
                Experiment::from_state(pool, snap.state)?
            }
            None => Experiment::new(pool)?,
        };
        for (ts, e) in &events[skip..] {
            exp.apply(*ts, e)?;
        }
        let rng = match options.seed {
            Some(s) => ChaCha8Rng::seed_from_u64(s ^ journal.lines()),
            None => ChaCha8Rng::from_rng(&mut rand::rng()),
        };
        Ok(Service {
            exp,
            journal,
            pool_sha256: pool_sha,
            options,
            since_snapshot: 0,
            rng,
        })
    }

    pub fn experiment(&self) -> &Experiment {
        &self.exp
    }

    pub fn journal_lines(&self) -> u64 {
        self.journal.lines()
    }

    /// Durable append, then apply.
    fn commit(&mut self, events: &[Event]) -> Result<()> {
        let ts = now_ms();
        self.journal.append(ts, events)?;
        self.exp.apply_all(ts, events)?;
        self.since_snapshot += events.len() as u64;
        if self.options.snapshot_every > 0 && self.since_snapshot >= self.options.snapshot_every {
            self.snapshot()?;
        }
        Ok(())
    }

    pub fn snapshot(&mut self) -> Result<()> {
        if let Some(path) = &self.options.snapshot {
            let snap = Snapshot {
                pool_sha256: self.pool_sha256.clone(),
                journal_lines: self.journal.lines(),
                state: self.exp.state().clone(),
            };
            write_json(path, &snap)?;
            self.since_snapshot = 0;
        }
        Ok(())
    }

    fn fresh_id(&mut self, prefix: &str) -> String {
        let bits: u128 = self.rng.random();
        format!("{prefix}{bits:032x}")
    }

    pub fn create_session(&mut self, participant: Option<&str>) -> Result<(String, Vec<PresentedItem>)> {
        let participant = match participant {
            Some(p) => p.to_string(),
            None => self.fresh_id("anon-"),
        };
        let mut session = self.fresh_id("s-");
        while self.exp.state().sessions.contains_key(&session) {
            session = self.fresh_id("s-");
        }
        let events = self.exp.create_session(&session, &participant, &mut self.rng)?;
        self.commit(&events)?;
        let items = self.exp.qualification_items(&session)?;
        Ok((session, items))
    }

    pub fn grade_qualification(&mut self, session: &str, answers: &[Choice]) -> Result<bool> {
        let events = self.exp.grade_qualification(session, answers, &mut self.rng)?;
        self.commit(&events)?;
        Ok(self.exp.session(session)?.phase != Phase::Failed)
    }

    pub fn next_item(&self, session: &str) -> Result<NextItem> {
        Ok(self.exp.next_item(session)?)
    }

    pub fn record_judgment(&mut self, session: &str, item: ItemId, choice: Choice) -> Result<JudgmentAck> {
        let ack = self.exp.record_judgment(session, item, choice)?;
        self.commit(&ack.events)?;
        Ok(ack)
    }

    pub fn analysis(&self, alternative: Alternative) -> Vec<AnalysisRow> {
        analyze(&self.exp, alternative)
    }
}
