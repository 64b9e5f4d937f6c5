use chrono::{DateTime, Utc};

use crate::curriculum::{Bank, Difficulty, ProblemItem};
use crate::learner::{Intervention, InterventionKind, LearnerState};
use crate::time::date_diff;

pub const STREAK_NUDGE_MIN: u32 = 3;
pub const REENGAGE_AFTER_DAYS: i64 = 3;
pub const SIMPLER_VARIANT_FAILURES: u32 = 3;

/// Easy item on the learner's weakest topic that has one.
fn simpler_variant<'b>(state: &LearnerState, bank: &'b Bank) -> Option<&'b ProblemItem> {
    bank.items()
        .iter()
        .filter(|i| i.difficulty == Difficulty::Easy)
        .min_by(|a, b| {
            state
                .m(a.primary_topic())
                .total_cmp(&state.m(b.primary_topic()))
                .then_with(|| a.id.cmp(&b.id))
        })
}

/// Interventions due at `now`, after opt-outs and the once-per-kind-per-day limit.
pub fn check_engagement(state: &LearnerState, bank: &Bank, now: DateTime<Utc>) -> Vec<Intervention> {
    let today = now.date_naive();
    let eng = state.engagement();
    let mut out = Vec::new();

    if let Some(last) = eng.last_seen {
        let idle = date_diff(last.date_naive(), today);
        if idle >= REENGAGE_AFTER_DAYS {
            out.push(Intervention {
                kind: InterventionKind::Reengagement,
                message: format!("It has been {idle} days. A short warm-up problem is ready when you are."),
                issued_at: now,
                suggested_item: None,
            });
        } else if idle == 2 && eng.streak_days >= STREAK_NUDGE_MIN {
            out.push(Intervention {
                kind: InterventionKind::StreakNudge,
                message: format!(
                    "Your {}-day streak paused yesterday. Rest is part of learning; pick it back up today.",
                    eng.streak_days
                ),
                issued_at: now,
                suggested_item: None,
            });
        }
    }
    if eng.failure_streak >= SIMPLER_VARIANT_FAILURES {
        if let Some(item) = simpler_variant(state, bank) {
            out.push(Intervention {
                kind: InterventionKind::SimplerVariant,
                message: format!(
                    "Several attempts in a row did not pass. Try `{}` to rebuild momentum on {}.",
                    item.id,
                    item.primary_topic()
                ),
                issued_at: now,
                suggested_item: Some(item.id.clone()),
            });
        }
    }

    out.retain(|i| {
        !state.preferences().opt_outs.contains(&i.kind)
            && !eng
                .interventions
                .iter()
                .any(|prev| prev.kind == i.kind && prev.issued_at.date_naive() == today)
    });
    out
}
