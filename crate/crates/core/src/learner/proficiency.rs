use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::LearnerState;

/// Streak length at which the streak signal saturates.
const STREAK_SATURATION_DAYS: f64 = 30.0;

/// Weights of the proficiency composite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProficiencyWeights {
    pub w_mastery_avg: f64,
    pub w_expertise_rank: f64,
    pub w_self_reported: f64,
    pub w_recent_success: f64,
    pub w_streak_norm: f64,
}

impl Default for ProficiencyWeights {
    fn default() -> Self {
        Self {
            w_mastery_avg: 0.40,
            w_expertise_rank: 0.25,
            w_self_reported: 0.20,
            w_recent_success: 0.10,
            w_streak_norm: 0.05,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProficiencyError {
    #[error("proficiency weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("proficiency weights must be non-negative")]
    NegativeWeight,
}

impl ProficiencyWeights {
    pub fn sum(&self) -> f64 {
        self.w_mastery_avg + self.w_expertise_rank + self.w_self_reported + self.w_recent_success + self.w_streak_norm
    }

    pub fn validate(&self) -> Result<(), ProficiencyError> {
        let ws = [
            self.w_mastery_avg,
            self.w_expertise_rank,
            self.w_self_reported,
            self.w_recent_success,
            self.w_streak_norm,
        ];
        if ws.iter().any(|w| !(*w >= 0.0)) {
            return Err(ProficiencyError::NegativeWeight);
        }
        let s = self.sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(ProficiencyError::WeightSum(s));
        }
        Ok(())
    }
}

/// Weighted composite p̂ of mean mastery, expertise rank, self-reported skill,
/// recent success and normalized streak. An empty mastery map counts as 0.
pub fn compute_proficiency(
    state: &LearnerState,
    weights: &ProficiencyWeights,
    recent_success: f64,
    streak_norm: f64,
) -> f64 {
    let prefs = &state.preferences;
    weights.w_mastery_avg * state.mean_mastery()
        + weights.w_expertise_rank * prefs.expertise_rank
        + weights.w_self_reported * prefs.self_reported_skill
        + weights.w_recent_success * recent_success
        + weights.w_streak_norm * streak_norm
}

/// Pass rate over the trailing activity window, 0 when there is no activity.
pub fn recent_success_rate(state: &LearnerState) -> f64 {
    let (attempts, passes) = state
        .engagement
        .activity_window
        .iter()
        .fold((0u32, 0u32), |(a, p), d| (a + d.attempts, p + d.passes));
    if attempts == 0 {
        0.0
    } else {
        f64::from(passes) / f64::from(attempts)
    }
}

/// `min(streak_days / 30, 1)`.
pub fn streak_norm(state: &LearnerState) -> f64 {
    (f64::from(state.engagement.streak_days) / STREAK_SATURATION_DAYS).min(1.0)
}

/// p̂ with the recent-success and streak signals derived from the state itself.
pub fn proficiency(state: &LearnerState, weights: &ProficiencyWeights) -> f64 {
    compute_proficiency(state, weights, recent_success_rate(state), streak_norm(state))
}
