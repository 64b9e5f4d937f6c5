use std::fmt;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::agents::{AssessmentResult, BehavioralTrend, Hint};
use crate::curriculum::{DailyAssignment, DailySet};
use crate::ids::{ItemId, TopicId};
use crate::learner::{Intervention, MasteryDelta, MemorySection};
use crate::observation::{ErrorTag, Observation};
use crate::scheduler::{Quality, ReviewItem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerKind {
    OnSubmission,
    OnHintRequest,
    OnSessionCheck,
    OnDailyGeneration,
    OnReviewDue,
}

impl TriggerKind {
    pub const ALL: [TriggerKind; 5] = [
        TriggerKind::OnSubmission,
        TriggerKind::OnHintRequest,
        TriggerKind::OnSessionCheck,
        TriggerKind::OnDailyGeneration,
        TriggerKind::OnReviewDue,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TriggerKind::OnSubmission => "on_submission",
            TriggerKind::OnHintRequest => "on_hint_request",
            TriggerKind::OnSessionCheck => "on_session_check",
            TriggerKind::OnDailyGeneration => "on_daily_generation",
            TriggerKind::OnReviewDue => "on_review_due",
        }
    }
}

impl fmt::Display for TriggerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Kind-specific trigger payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum TriggerEvent {
    OnSubmission {
        observation: Observation,
    },
    OnHintRequest {
        item_id: ItemId,
        /// Hints already shown for this item in the current attempt.
        hint_history: u32,
    },
    OnSessionCheck {
        date: NaiveDate,
    },
    OnDailyGeneration {
        date: NaiveDate,
    },
    /// A review is due. Carries the review attempt when there was one.
    OnReviewDue {
        date: NaiveDate,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        observation: Option<Observation>,
    },
}

/// A pedagogical event routed to an agent pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trigger {
    pub timestamp: DateTime<Utc>,
    /// Seed made available to agents that need randomness.
    pub seed: u64,
    #[serde(flatten)]
    pub event: TriggerEvent,
}

impl Trigger {
    pub fn new(timestamp: DateTime<Utc>, seed: u64, event: TriggerEvent) -> Self {
        Self { timestamp, seed, event }
    }

    pub fn kind(&self) -> TriggerKind {
        match self.event {
            TriggerEvent::OnSubmission { .. } => TriggerKind::OnSubmission,
            TriggerEvent::OnHintRequest { .. } => TriggerKind::OnHintRequest,
            TriggerEvent::OnSessionCheck { .. } => TriggerKind::OnSessionCheck,
            TriggerEvent::OnDailyGeneration { .. } => TriggerKind::OnDailyGeneration,
            TriggerEvent::OnReviewDue { .. } => TriggerKind::OnReviewDue,
        }
    }

    /// Calendar day the trigger refers to.
    pub fn date(&self) -> NaiveDate {
        match &self.event {
            TriggerEvent::OnSessionCheck { date }
            | TriggerEvent::OnDailyGeneration { date }
            | TriggerEvent::OnReviewDue { date, .. } => *date,
            TriggerEvent::OnSubmission { observation } => observation.timestamp.date_naive(),
            TriggerEvent::OnHintRequest { .. } => self.timestamp.date_naive(),
        }
    }

    pub fn observation(&self) -> Option<&Observation> {
        match &self.event {
            TriggerEvent::OnSubmission { observation } => Some(observation),
            TriggerEvent::OnReviewDue { observation, .. } => observation.as_ref(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentId {
    SkillAssessment,
    Profiler,
    Feedback,
    Curator,
    Engagement,
    ProgressSynthesizer,
}

impl AgentId {
    pub const ALL: [AgentId; 6] = [
        AgentId::SkillAssessment,
        AgentId::Profiler,
        AgentId::Feedback,
        AgentId::Curator,
        AgentId::Engagement,
        AgentId::ProgressSynthesizer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentId::SkillAssessment => "skill_assessment",
            AgentId::Profiler => "profiler",
            AgentId::Feedback => "feedback",
            AgentId::Curator => "curator",
            AgentId::Engagement => "engagement",
            AgentId::ProgressSynthesizer => "progress_synthesizer",
        }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "change", rename_all = "snake_case")]
pub enum EngagementChange {
    /// Adds attempts and passes to the day's activity entry.
    RecordActivity { date: NaiveDate, attempts: u32, passes: u32 },
    SetLastSeen { at: DateTime<Utc> },
    SetStreak { days: u32 },
    SetFailureStreak { count: u32 },
    RecordIntervention { intervention: Intervention },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "entry", rename_all = "snake_case")]
pub enum MemoryAppend {
    Note { section: MemorySection, text: String },
    /// One more piece of evidence for a misconception.
    Misconception { tag: ErrorTag, at: DateTime<Utc> },
}

/// Closed grammar of state mutations an agent may propose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "delta", rename_all = "snake_case")]
pub enum StateDelta {
    Mastery(MasteryDelta),
    ReviewUpsert(ReviewItem),
    Engagement(EngagementChange),
    Memory(MemoryAppend),
    Assignment(DailyAssignment),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilerReport {
    pub trend: BehavioralTrend,
    /// Raw error tags that fell outside the vocabulary.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unknown_tags: Vec<String>,
}

/// Learner-facing (or diagnostic) output of an agent; never touches state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    RecommendItems { set: DailySet },
    Hint { hint: Hint },
    AdjustSchedule {
        item_id: ItemId,
        quality: Quality,
        interval_days: u32,
        due_date: NaiveDate,
    },
    Intervene { interventions: Vec<Intervention> },
    Feedback {
        detail: u8,
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        assessment: Option<AssessmentResult>,
    },
    Report { report: ProfilerReport },
    ReviewForecast { due: Vec<ItemId>, carried: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub agent_id: AgentId,
    pub deltas: Vec<StateDelta>,
    #[serde(default)]
    pub actions: Vec<Action>,
    pub rationale: String,
}

impl Proposal {
    pub fn empty(agent_id: AgentId, rationale: impl Into<String>) -> Self {
        Self {
            agent_id,
            deltas: Vec::new(),
            actions: Vec::new(),
            rationale: rationale.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectReason {
    Bounds { topic: TopicId, value: f64 },
    UnknownTarget { target: String },
    CapExceeded { section: String, cap: usize },
    NotRouted { agent: AgentId },
    Schema { detail: String },
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::Bounds { topic, value } => write!(f, "mastery of `{topic}` would be {value}"),
            RejectReason::UnknownTarget { target } => write!(f, "unknown target `{target}`"),
            RejectReason::CapExceeded { section, cap } => write!(f, "memory section `{section}` over cap {cap}"),
            RejectReason::NotRouted { agent } => write!(f, "agent `{agent}` is not in the routed pipeline"),
            RejectReason::Schema { detail } => write!(f, "schema violation: {detail}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ProposalOutcome {
    Accepted { proposal: Proposal },
    Rejected { proposal: Proposal, reasons: Vec<RejectReason> },
    /// The agent itself errored; it was skipped.
    AgentFailed { agent_id: AgentId, error: String },
}

impl ProposalOutcome {
    pub fn agent_id(&self) -> AgentId {
        match self {
            ProposalOutcome::Accepted { proposal } | ProposalOutcome::Rejected { proposal, .. } => proposal.agent_id,
            ProposalOutcome::AgentFailed { agent_id, .. } => *agent_id,
        }
    }

    pub fn accepted(&self) -> Option<&Proposal> {
        match self {
            ProposalOutcome::Accepted { proposal } => Some(proposal),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum CommitStatus {
    Committed,
    /// Application failed; no delta was applied and only the version advanced.
    Failed { reason: String },
}

/// The committed, replayable record of one trigger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub version_before: u64,
    pub version_after: u64,
    pub trigger: Trigger,
    pub proposals: Vec<ProposalOutcome>,
    pub status: CommitStatus,
    pub state_digest_after: String,
    pub wall_time_ms: f64,
}

impl AuditRecord {
    pub fn accepted(&self) -> impl Iterator<Item = &Proposal> {
        self.proposals.iter().filter_map(ProposalOutcome::accepted)
    }

    pub fn actions(&self) -> impl Iterator<Item = &Action> {
        self.accepted().flat_map(|p| p.actions.iter())
    }
}
