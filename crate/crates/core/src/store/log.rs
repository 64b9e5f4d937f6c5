use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::orchestrator::{
    AgentId, AuditRecord, CommitStatus, ProposalOutcome, ReplayEntry, StateDelta, Trigger, TriggerKind,
};
use crate::store::StoreError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptedDelta {
    pub agent_id: AgentId,
    pub delta: StateDelta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedProposal {
    pub agent_id: AgentId,
    pub reasons: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deltas: Vec<StateDelta>,
}

/// One line of `events.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub version: u64,
    pub timestamp: DateTime<Utc>,
    pub trigger_kind: TriggerKind,
    /// The full trigger, enough to re-dispatch it.
    pub payload: Trigger,
    pub accepted_deltas: Vec<AcceptedDelta>,
    pub rejected: Vec<RejectedProposal>,
    /// Present when the commit itself failed and only the version advanced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commit_error: Option<String>,
    pub state_digest: String,
    pub latency_ms: f64,
}

impl From<&AuditRecord> for EventRecord {
    fn from(r: &AuditRecord) -> Self {
        let mut accepted_deltas = Vec::new();
        let mut rejected = Vec::new();
        for outcome in &r.proposals {
            match outcome {
                ProposalOutcome::Accepted { proposal } => accepted_deltas.extend(
                    proposal
                        .deltas
                        .iter()
                        .map(|d| AcceptedDelta {
                            agent_id: proposal.agent_id,
                            delta: d.clone(),
                        }),
                ),
                ProposalOutcome::Rejected { proposal, reasons } => rejected.push(RejectedProposal {
                    agent_id: proposal.agent_id,
                    reasons: reasons.iter().map(ToString::to_string).collect(),
                    deltas: proposal.deltas.clone(),
                }),
                ProposalOutcome::AgentFailed { agent_id, error } => rejected.push(RejectedProposal {
                    agent_id: *agent_id,
                    reasons: vec![format!("agent failed: {error}")],
                    deltas: Vec::new(),
                }),
            }
        }
        if matches!(r.status, CommitStatus::Failed { .. }) {
            accepted_deltas.clear();
        }
        Self {
            version: r.version_after,
            timestamp: r.trigger.timestamp,
            trigger_kind: r.trigger.kind(),
            payload: r.trigger.clone(),
            accepted_deltas,
            rejected,
            commit_error: match &r.status {
                CommitStatus::Failed { reason } => Some(reason.clone()),
                CommitStatus::Committed => None,
            },
            state_digest: r.state_digest_after.clone(),
            latency_ms: r.wall_time_ms,
        }
    }
}

impl From<&EventRecord> for ReplayEntry {
    fn from(e: &EventRecord) -> Self {
        Self {
            version_after: e.version,
            trigger: e.payload.clone(),
            state_digest_after: e.state_digest.clone(),
        }
    }
}

/// Parsed log plus an unterminated trailing fragment, if the last write was cut short.
#[derive(Debug, Clone, PartialEq)]
pub struct LogContents {
    pub records: Vec<EventRecord>,
    pub truncated_tail: Option<String>,
    /// Byte length of the complete lines.
    pub valid_len: u64,
}

/// Reads a log written on top of a state at `base_version`.
pub fn read_events(path: &Path, base_version: u64) -> Result<LogContents, StoreError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(e.into()),
    };
    let mut records = Vec::new();
    let mut valid_len = 0u64;
    let mut truncated_tail = None;
    let mut rest = text.as_str();
    let mut line_no = 0u64;
    while !rest.is_empty() {
        let (line, complete) = match rest.find('\n') {
            Some(i) => (&rest[..i], true),
            None => (rest, false),
        };
        line_no += 1;
        let expected = base_version + line_no;
        match serde_json::from_str::<EventRecord>(line) {
            Ok(rec) if complete => {
                if rec.version != expected {
                    return Err(StoreError::VersionGap {
                        expected,
                        found: rec.version,
                    });
                }
                records.push(rec);
                valid_len += line.len() as u64 + 1;
            }
            // A final line without its newline is treated as an interrupted write.
            _ if !complete => {
                truncated_tail = Some(line.to_owned());
                break;
            }
            Ok(_) => unreachable!(),
            Err(e) => {
                return Err(StoreError::CorruptLine {
                    line: line_no,
                    version: expected,
                    detail: e.to_string(),
                })
            }
        }
        rest = if complete { &rest[line.len() + 1..] } else { "" };
    }
    Ok(LogContents {
        records,
        truncated_tail,
        valid_len,
    })
}

/// Append-only JSONL writer enforcing consecutive versions.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
    last_version: u64,
}

impl EventLog {
    /// Opens (creating if needed) the log for appending. A truncated tail
    /// is an error here; call [`recover`] first.
    pub fn open(path: impl Into<PathBuf>, base_version: u64) -> Result<(Self, Vec<EventRecord>), StoreError> {
        let path = path.into();
        let contents = read_events(&path, base_version)?;
        if let Some(tail) = contents.truncated_tail {
            return Err(StoreError::TruncatedTail {
                after_version: base_version + contents.records.len() as u64,
                bytes: tail.len(),
            });
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let last_version = contents.records.last().map_or(base_version, |r| r.version);
        Ok((
            Self {
                path,
                file,
                last_version,
            },
            contents.records,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn last_version(&self) -> u64 {
        self.last_version
    }

    /// Writes one line and syncs it to disk before returning.
    pub fn append(&mut self, record: &EventRecord) -> Result<(), StoreError> {
        let expected = self.last_version + 1;
        if record.version != expected {
            return Err(StoreError::VersionGap {
                expected,
                found: record.version,
            });
        }
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        let mut w = BufWriter::new(&self.file);
        w.write_all(line.as_bytes())?;
        w.flush()?;
        drop(w);
        self.file.sync_data()?;
        self.last_version = record.version;
        Ok(())
    }
}

/// Cuts an interrupted final line off the log. Returns how many bytes were dropped.
pub fn recover(path: &Path, base_version: u64) -> Result<usize, StoreError> {
    let contents = read_events(path, base_version)?;
    let Some(tail) = contents.truncated_tail else {
        return Ok(0);
    };
    let file = OpenOptions::new().write(true).open(path)?;
    file.set_len(contents.valid_len)?;
    file.sync_all()?;
    Ok(tail.len())
}
