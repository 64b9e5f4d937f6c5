use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::agents::AgentError;
use crate::curriculum::ProblemItem;
use crate::learner::{apply_observation, LearnerState, MasteryConfig, MemorySection};
use crate::observation::{ErrorTag, Observation};
use crate::orchestrator::{
    Action, AgentId, EngagementChange, MemoryAppend, ProfilerReport, Proposal, StateDelta,
};
use crate::time::date_diff;

const TREND_DAYS: i64 = 7;
const FATIGUE_ATTEMPT_FACTOR: f64 = 2.0;
const FATIGUE_SUCCESS_MAX: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehavioralTrend {
    pub date: NaiveDate,
    pub attempts_today: u32,
    pub success_rate_today: f64,
    /// Attempts per day over the trailing week, today included.
    pub velocity: f64,
    /// Least-squares slope of daily success rate over the trailing week's active days.
    pub success_trend: f64,
    pub fatigue: bool,
}

/// (date, attempts, passes) for the trailing window with `obs` folded into its day.
fn window_with(state: &LearnerState, date: NaiveDate, passed: bool) -> Vec<(NaiveDate, u32, u32)> {
    let mut days: Vec<(NaiveDate, u32, u32)> = state
        .engagement()
        .activity_window
        .iter()
        .map(|d| (d.date, d.attempts, d.passes))
        .collect();
    match days.iter_mut().find(|d| d.0 == date) {
        Some(d) => {
            d.1 += 1;
            d.2 += u32::from(passed);
        }
        None => days.push((date, 1, u32::from(passed))),
    }
    days.sort_by_key(|d| d.0);
    days
}

fn slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return 0.0;
    }
    points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx
}

pub fn behavioral_trend(state: &LearnerState, obs: &Observation) -> BehavioralTrend {
    let today = obs.timestamp.date_naive();
    let days = window_with(state, today, obs.passed);
    let week: Vec<_> = days
        .iter()
        .filter(|d| (0..TREND_DAYS).contains(&date_diff(d.0, today)))
        .collect();
    let (_, attempts_today, passes_today) = **week.iter().find(|d| d.0 == today).expect("today folded in");
    let success_rate_today = f64::from(passes_today) / f64::from(attempts_today);
    let velocity = week.iter().map(|d| f64::from(d.1)).sum::<f64>() / TREND_DAYS as f64;
    let points: Vec<(f64, f64)> = week
        .iter()
        .filter(|d| d.1 > 0)
        .map(|d| (-(date_diff(d.0, today) as f64), f64::from(d.2) / f64::from(d.1)))
        .collect();

    let prior: Vec<f64> = week
        .iter()
        .filter(|d| d.0 != today && d.1 > 0)
        .map(|d| f64::from(d.1))
        .collect();
    let fatigue = !prior.is_empty() && {
        let mean = prior.iter().sum::<f64>() / prior.len() as f64;
        f64::from(attempts_today) > FATIGUE_ATTEMPT_FACTOR * mean && success_rate_today < FATIGUE_SUCCESS_MAX
    };

    BehavioralTrend {
        date: today,
        attempts_today,
        success_rate_today,
        velocity,
        success_trend: slope(&points),
        fatigue,
    }
}

/// Mastery deltas, engagement bookkeeping, misconception evidence and
/// behavioural trend for one submission.
pub fn profile_submission(
    state: &LearnerState,
    obs: &Observation,
    item: &ProblemItem,
    config: &MasteryConfig,
) -> Result<Proposal, AgentError> {
    obs.check().map_err(|e| AgentError::Malformed(e.to_string()))?;
    let mastery = apply_observation(state, obs, item, config).map_err(|e| AgentError::Malformed(e.to_string()))?;
    let mut deltas: Vec<StateDelta> = mastery.into_iter().map(StateDelta::Mastery).collect();

    let eng = state.engagement();
    let today = obs.timestamp.date_naive();
    deltas.push(StateDelta::Engagement(EngagementChange::RecordActivity {
        date: today,
        attempts: 1,
        passes: u32::from(obs.passed),
    }));
    let streak = match eng.last_seen.map(|t| date_diff(t.date_naive(), today)) {
        Some(0) => eng.streak_days.max(1),
        Some(1) => eng.streak_days + 1,
        _ => 1,
    };
    if streak != eng.streak_days {
        deltas.push(StateDelta::Engagement(EngagementChange::SetStreak { days: streak }));
    }
    deltas.push(StateDelta::Engagement(EngagementChange::SetLastSeen { at: obs.timestamp }));
    let failures = if obs.passed { 0 } else { eng.failure_streak + 1 };
    if failures != eng.failure_streak {
        deltas.push(StateDelta::Engagement(EngagementChange::SetFailureStreak { count: failures }));
    }

    let mut unknown_tags = Vec::new();
    for raw in &obs.error_tags {
        let tag = ErrorTag::classify(raw);
        if tag == ErrorTag::Other {
            unknown_tags.push(raw.clone());
        }
        deltas.push(StateDelta::Memory(MemoryAppend::Misconception { tag, at: obs.timestamp }));
    }

    let trend = behavioral_trend(state, obs);
    let marker = format!("fatigue {today}");
    if trend.fatigue && !state.memory().trends.iter().any(|t| t.starts_with(&marker)) {
        deltas.push(StateDelta::Memory(MemoryAppend::Note {
            section: MemorySection::Trends,
            text: format!(
                "{marker}: {} attempts at {:.0}% success",
                trend.attempts_today,
                trend.success_rate_today * 100.0
            ),
        }));
    }

    let rationale = format!(
        "{} on `{}`; streak {streak}, failure streak {failures}{}",
        if obs.passed { "pass" } else { "fail" },
        item.id,
        if trend.fatigue { "; fatigue signal" } else { "" }
    );
    Ok(Proposal {
        agent_id: AgentId::Profiler,
        deltas,
        actions: vec![Action::Report {
            report: ProfilerReport { trend, unknown_tags },
        }],
        rationale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curriculum::Difficulty;
    use crate::learner::{ActivityDay, EngagementState, LearnerStateBuilder};
    use chrono::{TimeZone, Utc};

    fn obs(passed: bool, tags: &[&str]) -> Observation {
        Observation {
            item_id: "a".into(),
            passed,
            timestamp: Utc.with_ymd_and_hms(2026, 3, 10, 12, 0, 0).unwrap(),
            hint_count: 0,
            error_tags: tags.iter().map(|t| t.to_string()).collect(),
            solve_time: 100.0,
            tests_passed: if passed { 3 } else { 1 },
            tests_total: 3,
            abandoned: false,
        }
    }

    fn state(failures: u32, window: Vec<ActivityDay>) -> LearnerState {
        let t0 = Utc.with_ymd_and_hms(2026, 3, 9, 12, 0, 0).unwrap();
        LearnerStateBuilder::new("l", t0)
            .topic_mastery("x", 0.5)
            .engagement(EngagementState {
                streak_days: 2,
                last_seen: Some(t0),
                failure_streak: failures,
                activity_window: window,
                interventions: vec![],
            })
            .build()
    }

    #[test]
    fn third_failure_sets_failure_streak() {
        let item = ProblemItem::minimal("a", &["x"], Difficulty::Easy);
        let p = profile_submission(&state(2, vec![]), &obs(false, &[]), &item, &MasteryConfig::default()).unwrap();
        assert!(p
            .deltas
            .contains(&StateDelta::Engagement(EngagementChange::SetFailureStreak { count: 3 })));
        assert!(p.deltas.contains(&StateDelta::Engagement(EngagementChange::SetStreak { days: 3 })));
    }

    #[test]
    fn unknown_tags_fold_into_other() {
        let item = ProblemItem::minimal("a", &["x"], Difficulty::Easy);
        let p = profile_submission(
            &state(0, vec![]),
            &obs(false, &["off-by-one", "cosmic-ray"]),
            &item,
            &MasteryConfig::default(),
        )
        .unwrap();
        let tags: Vec<ErrorTag> = p
            .deltas
            .iter()
            .filter_map(|d| match d {
                StateDelta::Memory(MemoryAppend::Misconception { tag, .. }) => Some(*tag),
                _ => None,
            })
            .collect();
        assert_eq!(tags, vec![ErrorTag::OffByOne, ErrorTag::Other]);
        let Action::Report { report } = &p.actions[0] else { panic!() };
        assert_eq!(report.unknown_tags, vec!["cosmic-ray".to_owned()]);
    }

    #[test]
    fn fatigue_needs_surge_and_low_success() {
        let d = |day: u32, attempts: u32, passes: u32| ActivityDay {
            date: NaiveDate::from_ymd_opt(2026, 3, day).unwrap(),
            attempts,
            passes,
        };
        let s = state(0, vec![d(8, 3, 2), d(9, 3, 2), d(10, 6, 1)]);
        assert!(behavioral_trend(&s, &obs(false, &[])).fatigue);
        let calm = state(0, vec![d(8, 3, 2), d(9, 3, 2), d(10, 2, 1)]);
        assert!(!behavioral_trend(&calm, &obs(false, &[])).fatigue);
    }
}
