//! The only place a [`LearnerState`] is mutated. Deltas are applied to a
//! private copy; the caller's state is never touched, so a failure part-way
//! through leaves nothing behind.

use chrono::Duration;
use thiserror::Error;

use crate::curriculum::DailyAssignment;
use crate::ids::TopicId;
use crate::learner::{
    ActivityDay, Intervention, LearnerState, MasteryDelta, Misconception, ACTIVITY_WINDOW_DAYS, RECENT_WINDOW,
};
use crate::observation::ErrorTag;
use crate::orchestrator::{
    AuditRecord, CommitStatus, EngagementChange, MemoryAppend, ProposalOutcome, StateDelta, Trigger,
};
use crate::scheduler::{ReviewItem, EASE_FLOOR};
use crate::learner::MemorySection;
use crate::store::state_digest;
use crate::time::date_diff;

/// Days of daily sets kept for the repetition window.
pub const ASSIGNMENT_RETENTION_DAYS: i64 = 30;
/// Days of interventions kept for rate limiting.
pub const INTERVENTION_RETENTION_DAYS: i64 = 7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApplyError {
    #[error("mastery of `{topic}` would leave [0, 1]: {value}")]
    Bounds { topic: TopicId, value: f64 },
    #[error("no mastery record for `{0}`")]
    UnknownTopic(TopicId),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("commit of version {version} failed: {source}")]
pub struct CommitError {
    pub version: u64,
    #[source]
    pub source: ApplyError,
}

fn apply_mastery(state: &mut LearnerState, d: &MasteryDelta) -> Result<(), ApplyError> {
    let tm = state
        .mastery
        .get_mut(&d.topic)
        .ok_or_else(|| ApplyError::UnknownTopic(d.topic.clone()))?;
    let value = if tm.m == d.before { d.after } else { tm.m + (d.after - d.before) };
    if !(0.0..=1.0).contains(&value) {
        return Err(ApplyError::Bounds {
            topic: d.topic.clone(),
            value,
        });
    }
    tm.m = value;
    if d.passed {
        tm.alpha_count += 1.0;
    } else {
        tm.beta_count += 1.0;
    }
    tm.last_update = tm.last_update.max(d.observed_at);
    tm.recent_solve_times.push(d.solve_time);
    let excess = tm.recent_solve_times.len().saturating_sub(RECENT_WINDOW);
    tm.recent_solve_times.drain(..excess);
    Ok(())
}

fn upsert_review(state: &mut LearnerState, r: &ReviewItem) -> Result<(), ApplyError> {
    if !(r.ease_factor >= EASE_FLOOR) || !r.ease_factor.is_finite() {
        return Err(ApplyError::Invalid(format!("ease factor {} below floor", r.ease_factor)));
    }
    if r.interval_days == 0 {
        return Err(ApplyError::Invalid("review interval must be at least one day".into()));
    }
    match state.reviews.binary_search_by(|x| x.item_id.cmp(&r.item_id)) {
        Ok(i) => state.reviews[i] = r.clone(),
        Err(i) => state.reviews.insert(i, r.clone()),
    }
    Ok(())
}

fn apply_engagement(state: &mut LearnerState, c: &EngagementChange) -> Result<(), ApplyError> {
    let eng = &mut state.engagement;
    match c {
        EngagementChange::RecordActivity { date, attempts, passes } => {
            match eng.activity_window.iter_mut().find(|d| d.date == *date) {
                Some(day) => {
                    day.attempts += attempts;
                    day.passes += passes;
                }
                None => eng.activity_window.push(ActivityDay {
                    date: *date,
                    attempts: *attempts,
                    passes: *passes,
                }),
            }
            eng.activity_window.sort_by_key(|d| d.date);
            let latest = eng.activity_window.last().map(|d| d.date).expect("just pushed");
            eng.activity_window
                .retain(|d| date_diff(d.date, latest) < ACTIVITY_WINDOW_DAYS as i64);
        }
        EngagementChange::SetLastSeen { at } => eng.last_seen = Some(eng.last_seen.map_or(*at, |t| t.max(*at))),
        EngagementChange::SetStreak { days } => eng.streak_days = *days,
        EngagementChange::SetFailureStreak { count } => eng.failure_streak = *count,
        EngagementChange::RecordIntervention { intervention } => record_intervention(&mut eng.interventions, intervention),
    }
    Ok(())
}

fn record_intervention(list: &mut Vec<Intervention>, i: &Intervention) {
    list.push(i.clone());
    let horizon = i.issued_at - Duration::days(INTERVENTION_RETENTION_DAYS);
    list.retain(|x| x.issued_at >= horizon);
    list.sort_by_key(|x| x.issued_at);
}

fn apply_memory(state: &mut LearnerState, m: &MemoryAppend) -> Result<(), ApplyError> {
    let mem = &mut state.memory;
    let cap = mem.cap_per_section.max(1);
    match m {
        MemoryAppend::Note { section, text } => {
            if text.trim().is_empty() {
                return Err(ApplyError::Invalid("empty memory note".into()));
            }
            let list = match section {
                MemorySection::Trends => &mut mem.trends,
                MemorySection::Insights => &mut mem.insights,
            };
            list.push(text.clone());
            let excess = list.len().saturating_sub(cap);
            list.drain(..excess);
        }
        MemoryAppend::Misconception { tag, at } => {
            upsert_misconception(&mut mem.misconceptions, *tag, *at, cap);
        }
    }
    Ok(())
}

fn upsert_misconception(list: &mut Vec<Misconception>, tag: ErrorTag, at: chrono::DateTime<chrono::Utc>, cap: usize) {
    match list.iter_mut().find(|m| m.tag == tag) {
        Some(m) => {
            m.evidence_count += 1;
            m.last_seen = m.last_seen.max(at);
        }
        None => list.push(Misconception {
            tag,
            evidence_count: 1,
            last_seen: at,
            rank: 0,
        }),
    }
    list.sort_by(|a, b| {
        b.evidence_count
            .cmp(&a.evidence_count)
            .then(b.last_seen.cmp(&a.last_seen))
            .then(a.tag.cmp(&b.tag))
    });
    list.truncate(cap);
    for (i, m) in list.iter_mut().enumerate() {
        m.rank = i as u32 + 1;
    }
}

fn apply_assignment(state: &mut LearnerState, a: &DailyAssignment) -> Result<(), ApplyError> {
    state.assignments.retain(|x| x.date != a.date);
    state.assignments.push(a.clone());
    state.assignments.sort_by_key(|x| x.date);
    let latest = state.assignments.last().map(|x| x.date).expect("just pushed");
    state
        .assignments
        .retain(|x| date_diff(x.date, latest) < ASSIGNMENT_RETENTION_DAYS);
    Ok(())
}

fn apply_delta(state: &mut LearnerState, delta: &StateDelta) -> Result<(), ApplyError> {
    match delta {
        StateDelta::Mastery(d) => apply_mastery(state, d),
        StateDelta::ReviewUpsert(r) => upsert_review(state, r),
        StateDelta::Engagement(c) => apply_engagement(state, c),
        StateDelta::Memory(m) => apply_memory(state, m),
        StateDelta::Assignment(a) => apply_assignment(state, a),
    }
}

/// `state` with `deltas` applied in order, without bumping the version.
pub(crate) fn stage(state: &LearnerState, deltas: &[StateDelta]) -> Result<LearnerState, ApplyError> {
    let mut next = state.clone();
    for d in deltas {
        apply_delta(&mut next, d)?;
    }
    Ok(next)
}

fn finish(mut next: LearnerState, base: &LearnerState, trigger: &Trigger) -> LearnerState {
    next.version = base.version + 1;
    next.updated_at = base.updated_at.max(trigger.timestamp);
    next
}

/// Applies every accepted proposal atomically and returns the next version
/// with its audit record (wall time left at zero for the caller to fill).
pub fn commit(
    state: &LearnerState,
    trigger: &Trigger,
    proposals: Vec<ProposalOutcome>,
) -> Result<(LearnerState, AuditRecord), CommitError> {
    let deltas: Vec<StateDelta> = proposals
        .iter()
        .filter_map(ProposalOutcome::accepted)
        .flat_map(|p| p.deltas.iter().cloned())
        .collect();
    let staged = stage(state, &deltas).map_err(|source| CommitError {
        version: state.version + 1,
        source,
    })?;
    let next = finish(staged, state, trigger);
    let record = AuditRecord {
        version_before: state.version,
        version_after: next.version,
        trigger: trigger.clone(),
        proposals,
        status: CommitStatus::Committed,
        state_digest_after: state_digest(&next),
        wall_time_ms: 0.0,
    };
    Ok((next, record))
}

/// The version-bump-only outcome recorded when a commit fails.
pub(crate) fn commit_failure(
    state: &LearnerState,
    trigger: &Trigger,
    proposals: Vec<ProposalOutcome>,
    reason: String,
) -> (LearnerState, AuditRecord) {
    let next = finish(state.clone(), state, trigger);
    let record = AuditRecord {
        version_before: state.version,
        version_after: next.version,
        trigger: trigger.clone(),
        proposals,
        status: CommitStatus::Failed { reason },
        state_digest_after: state_digest(&next),
        wall_time_ms: 0.0,
    };
    (next, record)
}
