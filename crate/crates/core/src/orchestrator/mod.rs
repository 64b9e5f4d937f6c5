//! Trigger routing, proposal validation and the single-writer commit path.

mod commit;
mod types;
mod validate;

use std::time::Instant;

use thiserror::Error;

use crate::agents::{AgentBackend, AgentContext};
use crate::config::EngineConfig;
use crate::curriculum::Bank;
use crate::learner::LearnerState;
use crate::store::state_digest;

pub use commit::{commit, ApplyError, CommitError, ASSIGNMENT_RETENTION_DAYS, INTERVENTION_RETENTION_DAYS};
pub use types::{
    Action, AgentId, AuditRecord, CommitStatus, EngagementChange, MemoryAppend, ProfilerReport, Proposal,
    ProposalOutcome, RejectReason, StateDelta, Trigger, TriggerEvent, TriggerKind,
};
pub use validate::validate;

/// Ordered agent pipeline for a trigger kind.
pub fn route_trigger(kind: TriggerKind) -> &'static [AgentId] {
    use AgentId::*;
    match kind {
        TriggerKind::OnSubmission => &[SkillAssessment, Profiler, Feedback],
        TriggerKind::OnHintRequest => &[Feedback],
        TriggerKind::OnSessionCheck => &[Curator, Engagement],
        TriggerKind::OnDailyGeneration => &[Curator],
        TriggerKind::OnReviewDue => &[ProgressSynthesizer, Curator],
    }
}

/// Owns one learner's state and is the only writer to it.
pub struct Orchestrator<'a, B> {
    state: LearnerState,
    bank: &'a Bank,
    config: &'a EngineConfig,
    backend: B,
    log: Vec<AuditRecord>,
    keep_log: bool,
    #[cfg(test)]
    fail_next_commit: bool,
}

impl<'a, B: AgentBackend> Orchestrator<'a, B> {
    pub fn new(state: LearnerState, bank: &'a Bank, config: &'a EngineConfig, backend: B) -> Self {
        Self {
            state,
            bank,
            config,
            backend,
            log: Vec::new(),
            keep_log: true,
            #[cfg(test)]
            fail_next_commit: false,
        }
    }

    /// Stops retaining audit records in memory (dispatch still returns them).
    pub fn without_log(mut self) -> Self {
        self.keep_log = false;
        self
    }

    pub fn state(&self) -> &LearnerState {
        &self.state
    }

    pub fn bank(&self) -> &Bank {
        self.bank
    }

    pub fn config(&self) -> &EngineConfig {
        self.config
    }

    pub fn audit_log(&self) -> &[AuditRecord] {
        &self.log
    }

    pub fn into_parts(self) -> (LearnerState, Vec<AuditRecord>) {
        (self.state, self.log)
    }

    /// Runs the routed pipeline over a read-only snapshot, validates each
    /// proposal in pipeline order and commits the accepted ones atomically.
    pub fn dispatch(&mut self, trigger: Trigger) -> AuditRecord {
        let started = Instant::now();
        let pipeline = route_trigger(trigger.kind());
        let ctx = AgentContext {
            trigger: &trigger,
            state: &self.state,
            bank: self.bank,
            config: self.config,
        };

        let mut outcomes = Vec::with_capacity(pipeline.len());
        let mut working = self.state.clone();
        for &agent in pipeline {
            let proposal = match self.backend.propose(agent, &ctx) {
                Ok(p) => p,
                Err(e) => {
                    outcomes.push(ProposalOutcome::AgentFailed {
                        agent_id: agent,
                        error: e.to_string(),
                    });
                    continue;
                }
            };
            match validate(&proposal, &working, pipeline, self.bank) {
                Ok(()) => {
                    working = commit::stage(&working, &proposal.deltas).expect("validated proposal stages");
                    outcomes.push(ProposalOutcome::Accepted { proposal });
                }
                Err(reasons) => outcomes.push(ProposalOutcome::Rejected { proposal, reasons }),
            }
        }
        drop(working);

        let result = self.try_commit(&trigger, outcomes.clone());
        let (next, mut record) = match result {
            Ok(ok) => ok,
            Err(e) => commit::commit_failure(&self.state, &trigger, outcomes, e.to_string()),
        };
        record.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
        self.state = next;
        if self.keep_log {
            self.log.push(record.clone());
        }
        record
    }

    #[cfg(not(test))]
    fn try_commit(&mut self, trigger: &Trigger, outcomes: Vec<ProposalOutcome>) -> Result<(LearnerState, AuditRecord), CommitError> {
        commit(&self.state, trigger, outcomes)
    }

    #[cfg(test)]
    fn try_commit(&mut self, trigger: &Trigger, outcomes: Vec<ProposalOutcome>) -> Result<(LearnerState, AuditRecord), CommitError> {
        if std::mem::take(&mut self.fail_next_commit) {
            return Err(CommitError {
                version: self.state.version() + 1,
                source: ApplyError::Invalid("injected fault".into()),
            });
        }
        commit(&self.state, trigger, outcomes)
    }
}

/// The part of an audit record replay needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayEntry {
    pub version_after: u64,
    pub trigger: Trigger,
    pub state_digest_after: String,
}

impl From<&AuditRecord> for ReplayEntry {
    fn from(r: &AuditRecord) -> Self {
        Self {
            version_after: r.version_after,
            trigger: r.trigger.clone(),
            state_digest_after: r.state_digest_after.clone(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("replay diverged at version {version}: recorded {expected}, recomputed {actual}")]
    Divergence {
        version: u64,
        expected: String,
        actual: String,
    },
    #[error("expected version {expected} next in the log, found {found}")]
    VersionGap { expected: u64, found: u64 },
}

/// Re-executes every logged trigger from `initial` and checks the digest
/// after each one.
pub fn replay<B: AgentBackend>(
    initial: LearnerState,
    entries: &[ReplayEntry],
    bank: &Bank,
    config: &EngineConfig,
    backend: B,
) -> Result<LearnerState, ReplayError> {
    let mut orch = Orchestrator::new(initial, bank, config, backend).without_log();
    for entry in entries {
        let expected = orch.state().version() + 1;
        if entry.version_after != expected {
            return Err(ReplayError::VersionGap {
                expected,
                found: entry.version_after,
            });
        }
        let record = orch.dispatch(entry.trigger.clone());
        if record.state_digest_after != entry.state_digest_after {
            return Err(ReplayError::Divergence {
                version: entry.version_after,
                expected: entry.state_digest_after.clone(),
                actual: record.state_digest_after,
            });
        }
    }
    Ok(orch.into_parts().0)
}

/// Digest of the state an orchestrator currently holds.
pub fn current_digest<B: AgentBackend>(orch: &Orchestrator<'_, B>) -> String {
    state_digest(orch.state())
}
