use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::EngineConfig;
use crate::curriculum::Bank;
use crate::learner::LearnerState;
use crate::orchestrator::AuditRecord;
use crate::store::{digest_bytes, parse_snapshot, read_events, write_snapshot, EventLog, EventRecord, StoreError};

/// Layout of one learner directory.
#[derive(Debug, Clone)]
pub struct StateDir {
    root: PathBuf,
}

/// Advisory single-writer lock; released on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

impl StateDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn snapshot_path(&self) -> PathBuf {
        self.root.join("snapshot.json")
    }

    pub fn digest_path(&self) -> PathBuf {
        self.root.join("snapshot.json.sha256")
    }

    /// Version-0 state the event log starts from.
    pub fn initial_path(&self) -> PathBuf {
        self.root.join("initial.json")
    }

    pub fn events_path(&self) -> PathBuf {
        self.root.join("events.jsonl")
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn bank_path(&self) -> PathBuf {
        self.root.join("bank.json")
    }

    pub fn lock(&self) -> Result<DirLock, StoreError> {
        let path = self.root.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(DirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(StoreError::Locked(self.root.display().to_string()))
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Creates the directory with its initial snapshot, config and bank.
    pub fn init(&self, state: &LearnerState, config: &EngineConfig, bank: &Bank) -> Result<(), StoreError> {
        fs::create_dir_all(&self.root)?;
        if self.snapshot_path().exists() {
            return Err(StoreError::AlreadyInitialized(self.root.display().to_string()));
        }
        let _lock = self.lock()?;
        let (bytes, _) = write_snapshot(state)?;
        write_atomic(&self.initial_path(), bytes.as_bytes())?;
        write_atomic(&self.config_path(), serde_json::to_string_pretty(config)?.as_bytes())?;
        write_atomic(&self.bank_path(), bank.to_json().as_bytes())?;
        File::create(self.events_path())?.sync_all()?;
        self.save_snapshot(state)?;
        Ok(())
    }

    pub fn save_snapshot(&self, state: &LearnerState) -> Result<String, StoreError> {
        let (bytes, digest) = write_snapshot(state)?;
        write_atomic(&self.snapshot_path(), bytes.as_bytes())?;
        write_atomic(&self.digest_path(), format!("{digest}\n").as_bytes())?;
        Ok(digest)
    }

    /// Latest snapshot, checked against its sidecar digest.
    pub fn load_snapshot(&self) -> Result<LearnerState, StoreError> {
        let bytes = fs::read_to_string(self.snapshot_path())?;
        let recorded = fs::read_to_string(self.digest_path())?.trim().to_owned();
        let actual = digest_bytes(bytes.as_bytes());
        if recorded != actual {
            return Err(StoreError::SnapshotDigest { recorded, actual });
        }
        parse_snapshot(&bytes)
    }

    pub fn load_initial(&self) -> Result<LearnerState, StoreError> {
        parse_snapshot(&fs::read_to_string(self.initial_path())?)
    }

    pub fn load_config(&self) -> Result<EngineConfig, StoreError> {
        Ok(EngineConfig::load(self.config_path())?)
    }

    pub fn load_bank(&self) -> Result<Bank, StoreError> {
        Ok(Bank::load(self.bank_path())?)
    }

    pub fn read_events(&self) -> Result<Vec<EventRecord>, StoreError> {
        let base = self.load_initial()?.version();
        Ok(read_events(&self.events_path(), base)?.records)
    }

    pub fn open_log(&self) -> Result<(EventLog, Vec<EventRecord>), StoreError> {
        let base = self.load_initial()?.version();
        EventLog::open(self.events_path(), base)
    }

    /// Persists one dispatched trigger: the event line first, then the snapshot.
    pub fn record(
        &self,
        _lock: &DirLock,
        log: &mut EventLog,
        record: &AuditRecord,
        state: &LearnerState,
    ) -> Result<(), StoreError> {
        log.append(&EventRecord::from(record))?;
        let digest = self.save_snapshot(state)?;
        if digest != record.state_digest_after {
            return Err(StoreError::SnapshotDigest {
                recorded: record.state_digest_after.clone(),
                actual: digest,
            });
        }
        Ok(())
    }
}
