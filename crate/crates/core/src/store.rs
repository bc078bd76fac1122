//! Append-only campaign persistence.
//!
//! A campaign directory holds `campaign.jsonl` (one JSON record per line,
//! strictly increasing `seq`) and `blobs/` with snippet sources stored
//! once per content hash as `<hash>.c`. The log alone reconstructs the
//! full trial history and every evaluation record, so a finished or
//! interrupted campaign replays exactly; a log truncated at a line
//! boundary replays cleanly up to the truncation point, while a torn last
//! line is reported as corruption at its sequence number.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::EvalRecord;
use crate::gateway::FinishReason;
use crate::hash::fnv1a64_hex;
use crate::tpe::{TrialConfig, TrialResult};

pub const LOG_FILE: &str = "campaign.jsonl";
pub const BLOBS_DIR: &str = "blobs";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("ordering violation: {0}")]
    OrderingViolation(String),
    #[error("corrupt log at seq {seq}: {detail}")]
    CorruptLog { seq: u64, detail: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One event in the campaign log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogPayload {
    TrialStarted {
        trial_id: u64,
        config: TrialConfig,
    },
    SnippetGenerated {
        trial_id: u64,
        snippet_id: String,
        prompt_hash: String,
        finish_reason: FinishReason,
    },
    SnippetEvaluated {
        snippet_id: String,
        record: EvalRecord,
    },
    TrialCompleted {
        trial_id: u64,
        objective: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    /// UTC milliseconds at append time.
    pub ts: u64,
    #[serde(flatten)]
    pub payload: LogPayload,
}

/// Writer handle over a campaign directory. Single writer by contract;
/// appends are serialized through `&mut self`.
pub struct CampaignStore {
    dir: PathBuf,
    writer: BufWriter<File>,
    next_seq: u64,
    started_trials: HashSet<u64>,
    generated_snippets: HashSet<String>,
}

impl CampaignStore {
    /// Open a campaign directory, creating it (and an empty log) if
    /// needed. An existing log is scanned so appends resume with the
    /// correct sequence number and reference sets.
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(dir.join(BLOBS_DIR))?;
        let log_path = dir.join(LOG_FILE);
        let mut next_seq = 1;
        let mut started_trials = HashSet::new();
        let mut generated_snippets = HashSet::new();
        if log_path.exists() {
            let records = scan_log(&log_path)?;
            for record in &records {
                match &record.payload {
                    LogPayload::TrialStarted { trial_id, .. } => {
                        started_trials.insert(*trial_id);
                    }
                    LogPayload::SnippetGenerated { snippet_id, .. } => {
                        generated_snippets.insert(snippet_id.clone());
                    }
                    _ => {}
                }
                next_seq = record.seq + 1;
            }
        }
        let writer = BufWriter::new(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(&log_path)?,
        );
        Ok(Self {
            dir: dir.to_path_buf(),
            writer,
            next_seq,
            started_trials,
            generated_snippets,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Append one record; returns its sequence number. Reference ordering
    /// is enforced here so the log is valid by construction.
    pub fn append(&mut self, payload: LogPayload) -> Result<u64, StoreError> {
        match &payload {
            LogPayload::SnippetEvaluated { snippet_id, .. }
                if !self.generated_snippets.contains(snippet_id) =>
            {
                return Err(StoreError::OrderingViolation(format!(
                    "snippet '{snippet_id}' evaluated before being generated"
                )));
            }
            LogPayload::TrialCompleted { trial_id, .. }
                if !self.started_trials.contains(trial_id) =>
            {
                return Err(StoreError::OrderingViolation(format!(
                    "trial {trial_id} completed before being started"
                )));
            }
            _ => {}
        }

        let record = LogRecord {
            seq: self.next_seq,
            ts: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
            payload,
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;

        match &record.payload {
            LogPayload::TrialStarted { trial_id, .. } => {
                self.started_trials.insert(*trial_id);
            }
            LogPayload::SnippetGenerated { snippet_id, .. } => {
                self.generated_snippets.insert(snippet_id.clone());
            }
            _ => {}
        }
        self.next_seq += 1;
        Ok(record.seq)
    }

    /// Store a snippet source as a content-addressed blob; identical text
    /// lands in the same file. Returns the hash (the snippet id).
    pub fn put_blob(&self, source: &str) -> Result<String, StoreError> {
        let hash = fnv1a64_hex(source.as_bytes());
        let path = self.blob_path(&hash);
        if !path.exists() {
            fs::write(&path, source)?;
        }
        Ok(hash)
    }

    pub fn blob_path(&self, hash: &str) -> PathBuf {
        self.dir.join(BLOBS_DIR).join(format!("{hash}.c"))
    }
}

/// The reconstructed view of a campaign.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayedCampaign {
    /// Completed trials in completion order.
    pub trials: Vec<TrialResult>,
    /// Evaluation records in evaluation order.
    pub records: Vec<EvalRecord>,
    pub log: Vec<LogRecord>,
}

/// Read and validate a campaign log, reconstructing trial history and
/// evaluation records. `dir` may be the campaign directory or the log
/// file itself.
pub fn replay(dir: &Path) -> Result<ReplayedCampaign, StoreError> {
    let log_path = if dir.is_dir() { dir.join(LOG_FILE) } else { dir.to_path_buf() };
    let records = scan_log(&log_path)?;

    let mut started: HashMap<u64, TrialConfig> = HashMap::new();
    let mut generated: HashSet<String> = HashSet::new();
    let mut replayed = ReplayedCampaign::default();
    for record in &records {
        match &record.payload {
            LogPayload::TrialStarted { trial_id, config } => {
                started.insert(*trial_id, config.clone());
            }
            LogPayload::SnippetGenerated { snippet_id, .. } => {
                generated.insert(snippet_id.clone());
            }
            LogPayload::SnippetEvaluated { snippet_id, record: eval } => {
                if !generated.contains(snippet_id) {
                    return Err(StoreError::CorruptLog {
                        seq: record.seq,
                        detail: format!("snippet '{snippet_id}' evaluated but never generated"),
                    });
                }
                replayed.records.push(eval.clone());
            }
            LogPayload::TrialCompleted { trial_id, objective } => {
                let config = started.get(trial_id).ok_or_else(|| StoreError::CorruptLog {
                    seq: record.seq,
                    detail: format!("trial {trial_id} completed but never started"),
                })?;
                replayed
                    .trials
                    .push(TrialResult::completed(config.clone(), *objective));
            }
        }
    }
    replayed.log = records;
    Ok(replayed)
}

fn scan_log(log_path: &Path) -> Result<Vec<LogRecord>, StoreError> {
    let file = match File::open(log_path) {
        Ok(file) => file,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let reader = BufReader::new(file);
    let mut records: Vec<LogRecord> = Vec::new();
    let mut last_seq = 0u64;
    for line in reader.split(b'\n') {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let record: LogRecord =
            serde_json::from_slice(&line).map_err(|e| StoreError::CorruptLog {
                seq: last_seq + 1,
                detail: format!("unparseable line: {e}"),
            })?;
        if record.seq <= last_seq {
            return Err(StoreError::CorruptLog {
                seq: record.seq,
                detail: format!("seq not increasing (previous {last_seq})"),
            });
        }
        last_seq = record.seq;
        records.push(record);
    }
    Ok(records)
}
