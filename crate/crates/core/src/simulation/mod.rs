//! Parametric learner personas, the seeded trajectory runner, the reward
//! signal and the evaluation metrics.

mod metrics;
mod persona;
mod report;
mod runner;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{auroc, brier, ece, median};
pub use persona::{
    attempt_rng, default_personas, difficulty_value, load_personas, logistic, pass_probability, persona_attempt,
    Persona, PersonaState, MAX_LEARNING_RATE,
};
pub use report::{
    compute_metrics, run_simulation, summarize, write_reports, PersonaSummary, SimulationReport, TrajectoryMetrics,
};
pub use runner::{run_trajectory, TaskRecord, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub w_m: f64,
    pub w_r: f64,
    pub w_h: f64,
    pub w_t: f64,
    /// Seconds.
    pub mu_t: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            w_m: 1.0,
            w_r: 0.5,
            w_h: 0.01,
            w_t: 0.0001,
            mu_t: 300.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), String> {
        if [self.w_m, self.w_r, self.w_h, self.w_t].iter().any(|w| !(*w >= 0.0)) {
            return Err("reward weights must be non-negative".into());
        }
        if !(self.mu_t >= 0.0) {
            return Err("mu_t must be non-negative".into());
        }
        Ok(())
    }
}

/// `w_m Δm + w_r 1[review success] − w_h hints − w_t max(0, t − μ_t)`.
pub fn reward(delta_m: f64, review_success: bool, hint_count: u32, solve_time: f64, config: &RewardConfig) -> f64 {
    config.w_m * delta_m + if review_success { config.w_r } else { 0.0 }
        - config.w_h * f64::from(hint_count)
        - config.w_t * (solve_time - config.mu_t).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub days: u32,
    pub start_date: NaiveDate,
    pub logistic_slope: f64,
    /// Pass-logit boost of a level-5 hint at full responsiveness.
    pub hint_boost: f64,
    pub difficulty_easy: f64,
    pub difficulty_medium: f64,
    pub difficulty_hard: f64,
    /// Solve time is `expected * (low + span * u)`.
    pub solve_time_low: f64,
    pub solve_time_span: f64,
    /// Medium-difficulty attempts per topic used to initialise mastery.
    pub pretest_attempts: u32,
    pub ece_bins: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            days: 30,
            start_date: NaiveDate::from_ymd_opt(2026, 1, 5).expect("valid date"),
            logistic_slope: 3.0,
            hint_boost: 0.8,
            difficulty_easy: 0.3,
            difficulty_medium: 0.5,
            difficulty_hard: 0.7,
            solve_time_low: 0.6,
            solve_time_span: 0.8,
            pretest_attempts: 6,
            ece_bins: 10,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.logistic_slope > 0.0) {
            return Err("logistic_slope must be positive".into());
        }
        if !(self.hint_boost >= 0.0) {
            return Err("hint_boost must be non-negative".into());
        }
        if !(self.solve_time_low > 0.0 && self.solve_time_span >= 0.0) {
            return Err("solve time range must be positive".into());
        }
        if self.ece_bins == 0 {
            return Err("ece_bins must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("invalid persona: {0}")]
    Persona(String),
    #[error("days must be at least 1")]
    NoDays,
    #[error(transparent)]
    Mastery(#[from] crate::learner::MasteryError),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_examples() {
        let zero = RewardConfig {
            w_m: 0.0,
            w_r: 0.0,
            w_h: 0.0,
            w_t: 0.0,
            mu_t: 0.0,
        };
        assert_eq!(reward(0.0, false, 0, 0.0, &zero), 0.0);
        let c = RewardConfig {
            w_m: 1.0,
            w_h: 0.01,
            ..zero.clone()
        };
        assert!((reward(0.1, false, 2, 0.0, &c) - 0.08).abs() < 1e-15);
        let r = RewardConfig { w_r: 0.5, ..zero };
        assert_eq!(reward(0.0, true, 0, 0.0, &r), 0.5);
    }
}
