//! File-based event sourcing: canonical snapshots with digest sidecars and
//! an append-only JSONL event log per learner directory.

mod canonical;
mod dir;
mod log;

use thiserror::Error;

use crate::agents::AgentBackend;
use crate::config::EngineConfig;
use crate::curriculum::Bank;
use crate::learner::LearnerState;
use crate::orchestrator::{replay, ReplayEntry, ReplayError};

pub use canonical::{canonical_json, digest_bytes, non_finite_field, parse_snapshot, state_digest, write_snapshot};
pub use dir::{DirLock, StateDir};
pub use log::{read_events, recover, AcceptedDelta, EventLog, EventRecord, LogContents, RejectedProposal};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("non-finite number at `{0}`")]
    NonFinite(String),
    #[error("expected version {expected}, found {found}")]
    VersionGap { expected: u64, found: u64 },
    #[error("event log line {line} (version {version}) is corrupt: {detail}")]
    CorruptLine { line: u64, version: u64, detail: String },
    #[error("event log ends with an incomplete line ({bytes} bytes) after version {after_version}")]
    TruncatedTail { after_version: u64, bytes: usize },
    #[error("snapshot digest mismatch: sidecar {recorded}, contents {actual}")]
    SnapshotDigest { recorded: String, actual: String },
    #[error("snapshot is at version {snapshot} but the log ends at {log}")]
    SnapshotBehind { snapshot: u64, log: u64 },
    #[error("{0} is locked by another writer (remove {0}/.lock if stale)")]
    Locked(String),
    #[error("{0} already holds a learner state")]
    AlreadyInitialized(String),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Bank(#[from] crate::curriculum::BankError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Replays `events` on top of `initial` and checks every recorded digest.
pub fn reconstruct<B: AgentBackend>(
    initial: LearnerState,
    events: &[EventRecord],
    bank: &Bank,
    config: &EngineConfig,
    backend: B,
) -> Result<LearnerState, StoreError> {
    let entries: Vec<ReplayEntry> = events.iter().map(ReplayEntry::from).collect();
    Ok(replay(initial, &entries, bank, config, backend)?)
}
