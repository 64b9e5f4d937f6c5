//! The six specialist agents. Each maps a read-only view of the learner
//! state plus a trigger to a [`Proposal`]; none of them can write state.

mod assessment;
mod engagement;
mod hints;
mod profiler;
mod progress;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::EngineConfig;
use crate::curriculum::{select_daily_set, Bank, DailySet};
use crate::learner::{proficiency, LearnerState, MemorySection};
use crate::orchestrator::{
    Action, AgentId, AuditRecord, EngagementChange, MemoryAppend, Proposal, StateDelta, Trigger,
    TriggerEvent,
};
use crate::scheduler::build_review_queue;

pub use assessment::{assess_submission, detail_level, feedback_message, AssessmentResult, FailingTest};
pub use engagement::{check_engagement, REENGAGE_AFTER_DAYS, SIMPLER_VARIANT_FAILURES, STREAK_NUDGE_MIN};
pub use hints::{generate_hint, hint_level, tier_for, Hint, HintError, HINT_LEVEL_NAMES, MAX_HINT_LEVEL};
pub use profiler::{behavioral_trend, profile_submission, BehavioralTrend};
pub use progress::{schedule_review, ScheduleUpdate};

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error("unknown item `{0}`")]
    UnknownItem(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error(transparent)]
    Hint(#[from] HintError),
    #[error("agent `{0}` has no behaviour for trigger `{1}`")]
    Unsupported(AgentId, String),
    #[error("no recorded proposal for `{agent}` at version {version}")]
    MissingFixture { agent: AgentId, version: u64 },
    #[error("fixture: {0}")]
    Fixture(String),
}

/// Everything an agent may look at when proposing.
#[derive(Debug, Clone, Copy)]
pub struct AgentContext<'a> {
    pub trigger: &'a Trigger,
    pub state: &'a LearnerState,
    pub bank: &'a Bank,
    pub config: &'a EngineConfig,
}

impl AgentContext<'_> {
    fn item(&self, id: &crate::ids::ItemId) -> Result<&crate::curriculum::ProblemItem, AgentError> {
        self.bank.get(id).ok_or_else(|| AgentError::UnknownItem(id.to_string()))
    }

    fn p_hat(&self) -> f64 {
        proficiency(self.state, &self.config.proficiency)
    }
}

/// Source of agent proposals.
pub trait AgentBackend {
    fn propose(&self, agent: AgentId, ctx: &AgentContext<'_>) -> Result<Proposal, AgentError>;
}

impl<B: AgentBackend + ?Sized> AgentBackend for Box<B> {
    fn propose(&self, agent: AgentId, ctx: &AgentContext<'_>) -> Result<Proposal, AgentError> {
        (**self).propose(agent, ctx)
    }
}

impl<B: AgentBackend + ?Sized> AgentBackend for &B {
    fn propose(&self, agent: AgentId, ctx: &AgentContext<'_>) -> Result<Proposal, AgentError> {
        (**self).propose(agent, ctx)
    }
}

/// Rule-based policies; pure functions of the context.
#[derive(Debug, Clone, Copy, Default)]
pub struct DeterministicAgents;

impl AgentBackend for DeterministicAgents {
    fn propose(&self, agent: AgentId, ctx: &AgentContext<'_>) -> Result<Proposal, AgentError> {
        match agent {
            AgentId::SkillAssessment => skill_assessment(ctx),
            AgentId::Profiler => profiler(ctx),
            AgentId::Feedback => feedback(ctx),
            AgentId::Curator => curator(ctx),
            AgentId::Engagement => engagement(ctx),
            AgentId::ProgressSynthesizer => progress_synthesizer(ctx),
        }
    }
}

fn unsupported(agent: AgentId, ctx: &AgentContext<'_>) -> AgentError {
    AgentError::Unsupported(agent, ctx.trigger.kind().to_string())
}

fn skill_assessment(ctx: &AgentContext<'_>) -> Result<Proposal, AgentError> {
    let TriggerEvent::OnSubmission { observation } = &ctx.trigger.event else {
        return Err(unsupported(AgentId::SkillAssessment, ctx));
    };
    let item = ctx.item(&observation.item_id)?;
    let result = assess_submission(observation, item, ctx.p_hat())?;
    Ok(Proposal {
        agent_id: AgentId::SkillAssessment,
        deltas: Vec::new(),
        rationale: format!("{}/{} tests", result.tests_passed, result.tests_total),
        actions: vec![Action::Feedback {
            detail: result.detail_level,
            message: feedback_message(&result),
            assessment: Some(result),
        }],
    })
}

fn profiler(ctx: &AgentContext<'_>) -> Result<Proposal, AgentError> {
    let TriggerEvent::OnSubmission { observation } = &ctx.trigger.event else {
        return Err(unsupported(AgentId::Profiler, ctx));
    };
    let item = ctx.item(&observation.item_id)?;
    profile_submission(ctx.state, observation, item, &ctx.config.mastery)
}

fn feedback(ctx: &AgentContext<'_>) -> Result<Proposal, AgentError> {
    let p_hat = ctx.p_hat();
    match &ctx.trigger.event {
        TriggerEvent::OnHintRequest { item_id, hint_history } => {
            let item = ctx.item(item_id)?;
            let hint = generate_hint(item, *hint_history, p_hat)?;
            Ok(Proposal {
                agent_id: AgentId::Feedback,
                deltas: Vec::new(),
                rationale: format!("level {} ({:?}) after {hint_history} prior hint(s)", hint.level, hint.tier),
                actions: vec![Action::Hint { hint }],
            })
        }
        TriggerEvent::OnSubmission { observation } => {
            let detail = detail_level(tier_for(p_hat));
            let message = if observation.passed {
                if observation.hint_count > 0 {
                    format!("Solved with {} hint(s). Try the next one unaided.", observation.hint_count)
                } else {
                    "Solved without hints.".to_owned()
                }
            } else if observation.abandoned {
                "Attempt abandoned. A hint is available next time.".to_owned()
            } else {
                "Not there yet. Request a hint to get unstuck.".to_owned()
            };
            Ok(Proposal {
                agent_id: AgentId::Feedback,
                deltas: Vec::new(),
                rationale: format!("detail level {detail}"),
                actions: vec![Action::Feedback {
                    detail,
                    message,
                    assessment: None,
                }],
            })
        }
        _ => Err(unsupported(AgentId::Feedback, ctx)),
    }
}

fn curator(ctx: &AgentContext<'_>) -> Result<Proposal, AgentError> {
    let cfg = ctx.config;
    match &ctx.trigger.event {
        TriggerEvent::OnDailyGeneration { date } => {
            if let Some(existing) = ctx.state.assignment_on(*date) {
                let set = DailySet {
                    date: *date,
                    targets: crate::curriculum::apportion(cfg.curriculum.daily_set_size, &cfg.curriculum),
                    items: existing.items.clone(),
                    shortfall: existing.shortfall,
                    pools: Default::default(),
                };
                return Ok(Proposal {
                    agent_id: AgentId::Curator,
                    deltas: Vec::new(),
                    rationale: format!("set for {date} already issued"),
                    actions: vec![Action::RecommendItems { set }],
                });
            }
            let queue = build_review_queue(ctx.state, *date, &cfg.scheduler);
            let set = select_daily_set(ctx.state, ctx.bank, &queue.items, *date, &cfg.curriculum, ctx.trigger.seed);
            Ok(Proposal {
                agent_id: AgentId::Curator,
                deltas: vec![StateDelta::Assignment(set.to_assignment())],
                rationale: format!(
                    "{} items ({} review due, {} carried, shortfall {})",
                    set.items.len(),
                    queue.items.len(),
                    queue.carried,
                    set.shortfall
                ),
                actions: vec![Action::RecommendItems { set }],
            })
        }
        TriggerEvent::OnSessionCheck { date } => {
            let queue = build_review_queue(ctx.state, *date, &cfg.scheduler);
            Ok(Proposal {
                agent_id: AgentId::Curator,
                deltas: Vec::new(),
                rationale: format!("{} review(s) due", queue.items.len()),
                actions: vec![Action::ReviewForecast {
                    due: queue.items.into_iter().map(|r| r.item_id).collect(),
                    carried: queue.carried,
                }],
            })
        }
        TriggerEvent::OnReviewDue { observation, .. } => {
            let mut p = Proposal::empty(AgentId::Curator, "review noted");
            if let Some(obs) = observation.as_ref().filter(|o| !o.passed) {
                let item = ctx.item(&obs.item_id)?;
                p.deltas.push(StateDelta::Memory(MemoryAppend::Note {
                    section: MemorySection::Insights,
                    text: format!(
                        "{}: review of `{}` failed; reinforce {}",
                        obs.timestamp.date_naive(),
                        item.id,
                        item.primary_topic()
                    ),
                }));
                p.rationale = format!("failed review of `{}`", item.id);
            }
            Ok(p)
        }
        _ => Err(unsupported(AgentId::Curator, ctx)),
    }
}

fn engagement(ctx: &AgentContext<'_>) -> Result<Proposal, AgentError> {
    if !matches!(ctx.trigger.event, TriggerEvent::OnSessionCheck { .. }) {
        return Err(unsupported(AgentId::Engagement, ctx));
    }
    let interventions = check_engagement(ctx.state, ctx.bank, ctx.trigger.timestamp);
    let mut p = Proposal::empty(AgentId::Engagement, format!("{} intervention(s)", interventions.len()));
    if interventions.is_empty() {
        return Ok(p);
    }
    p.deltas = interventions
        .iter()
        .map(|i| StateDelta::Engagement(EngagementChange::RecordIntervention { intervention: i.clone() }))
        .collect();
    p.actions.push(Action::Intervene { interventions });
    Ok(p)
}

fn progress_synthesizer(ctx: &AgentContext<'_>) -> Result<Proposal, AgentError> {
    let TriggerEvent::OnReviewDue { date, observation } = &ctx.trigger.event else {
        return Err(unsupported(AgentId::ProgressSynthesizer, ctx));
    };
    let cfg = &ctx.config.scheduler;
    match observation {
        Some(obs) => {
            obs.check().map_err(|e| AgentError::Malformed(e.to_string()))?;
            let item = ctx.item(&obs.item_id)?;
            let update = schedule_review(ctx.state, obs, item, *date, cfg);
            Ok(Proposal {
                agent_id: AgentId::ProgressSynthesizer,
                rationale: format!(
                    "q={} EF={:.3} interval={}d",
                    update.quality.value(),
                    update.item.ease_factor,
                    update.item.interval_days
                ),
                actions: vec![Action::AdjustSchedule {
                    item_id: update.item.item_id.clone(),
                    quality: update.quality,
                    interval_days: update.item.interval_days,
                    due_date: update.item.due_date,
                }],
                deltas: vec![StateDelta::ReviewUpsert(update.item)],
            })
        }
        None => {
            let queue = build_review_queue(ctx.state, *date, cfg);
            Ok(Proposal {
                agent_id: AgentId::ProgressSynthesizer,
                deltas: Vec::new(),
                rationale: format!("{} due, {} carried over", queue.items.len(), queue.carried),
                actions: vec![Action::ReviewForecast {
                    due: queue.items.into_iter().map(|r| r.item_id).collect(),
                    carried: queue.carried,
                }],
            })
        }
    }
}

/// A proposal captured from a previous run, keyed by the state version it
/// was made against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedProposal {
    pub version: u64,
    pub agent_id: AgentId,
    pub result: Result<Proposal, String>,
}

/// Serves recorded proposals instead of computing them.
#[derive(Debug, Clone, Default)]
pub struct ReplayAgents {
    fixtures: BTreeMap<(u64, AgentId), Result<Proposal, String>>,
}

impl ReplayAgents {
    pub fn new(recorded: impl IntoIterator<Item = RecordedProposal>) -> Self {
        Self {
            fixtures: recorded
                .into_iter()
                .map(|r| ((r.version, r.agent_id), r.result))
                .collect(),
        }
    }

    /// Fixture built from the proposals in an audit trail, accepted or not.
    pub fn from_audit<'r>(records: impl IntoIterator<Item = &'r AuditRecord>) -> Self {
        use crate::orchestrator::ProposalOutcome;
        Self::new(records.into_iter().flat_map(|rec| {
            rec.proposals.iter().map(move |o| RecordedProposal {
                version: rec.version_before,
                agent_id: o.agent_id(),
                result: match o {
                    ProposalOutcome::Accepted { proposal } | ProposalOutcome::Rejected { proposal, .. } => {
                        Ok(proposal.clone())
                    }
                    ProposalOutcome::AgentFailed { error, .. } => Err(error.clone()),
                },
            })
        }))
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path).map_err(|e| AgentError::Fixture(format!("{}: {e}", path.display())))?;
        let recorded: Vec<RecordedProposal> =
            serde_json::from_str(&text).map_err(|e| AgentError::Fixture(e.to_string()))?;
        Ok(Self::new(recorded))
    }

    pub fn recorded(&self) -> Vec<RecordedProposal> {
        self.fixtures
            .iter()
            .map(|(&(version, agent_id), result)| RecordedProposal {
                version,
                agent_id,
                result: result.clone(),
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.fixtures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures.is_empty()
    }
}

impl AgentBackend for ReplayAgents {
    fn propose(&self, agent: AgentId, ctx: &AgentContext<'_>) -> Result<Proposal, AgentError> {
        let version = ctx.state.version();
        match self.fixtures.get(&(version, agent)) {
            Some(Ok(p)) => Ok(p.clone()),
            Some(Err(e)) => Err(AgentError::Fixture(e.clone())),
            None => Err(AgentError::MissingFixture { agent, version }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Deterministic,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentsConfig {
    pub backend: BackendKind,
    /// Recorded proposals for the replay backend.
    pub fixture: Option<PathBuf>,
}

/// Instantiates the configured backend.
pub fn backend_from_config(config: &AgentsConfig) -> Result<Box<dyn AgentBackend>, AgentError> {
    match config.backend {
        BackendKind::Deterministic => Ok(Box::new(DeterministicAgents)),
        BackendKind::Replay => {
            let path = config
                .fixture
                .as_deref()
                .ok_or_else(|| AgentError::Fixture("replay backend needs `agents.fixture`".into()))?;
            Ok(Box::new(ReplayAgents::load(path)?))
        }
    }
}
