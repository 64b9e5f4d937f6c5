//! SM-2 spaced repetition with context-aware interval adjustments.
//!
//! Quality grades come from the observation (speed, hints, partial passes),
//! the ease factor follows the classic SM-2 update with a 1.3 floor, and
//! intervals run 1, 6, then `round(prev * EF)`. Recall is modelled as
//! `exp(-Δt / τ)` with `τ = c * EF * interval`.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{ItemId, TopicId};
use crate::learner::LearnerState;
use crate::observation::Observation;
use crate::time::{add_days, date_diff};

pub const EASE_FLOOR: f64 = 1.3;
pub const INITIAL_EASE: f64 = 2.5;

/// One entry of the review queue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub item_id: ItemId,
    pub topics: Vec<TopicId>,
    pub due_date: NaiveDate,
    pub interval_days: u32,
    pub ease_factor: f64,
    pub n_reviews: u32,
}

impl ReviewItem {
    /// A not-yet-reviewed entry with the initial ease factor.
    pub fn fresh(item_id: ItemId, topics: Vec<TopicId>, today: NaiveDate) -> Self {
        Self {
            item_id,
            topics,
            due_date: today,
            interval_days: 1,
            ease_factor: INITIAL_EASE,
            n_reviews: 0,
        }
    }

    /// Date the current interval started.
    pub fn last_review_date(&self) -> NaiveDate {
        add_days(self.due_date, -i64::from(self.interval_days))
    }

    /// Recall probability on `date` under the exponential forgetting curve.
    pub fn recall_on(&self, date: NaiveDate, config: &SchedulerConfig) -> f64 {
        let elapsed = date_diff(self.last_review_date(), date).max(0) as f64;
        predict_recall(elapsed, self.ease_factor, f64::from(self.interval_days), config)
    }
}

/// SM-2 quality grade in `0..=5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Quality(u8);

#[derive(Debug, Error, PartialEq)]
#[error("quality must be in 0..=5, got {0}")]
pub struct QualityOutOfRange(pub u8);

impl Quality {
    pub fn new(q: u8) -> Result<Self, QualityOutOfRange> {
        if q <= 5 {
            Ok(Self(q))
        } else {
            Err(QualityOutOfRange(q))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn is_success(self) -> bool {
        self.0 >= 3
    }
}

impl TryFrom<u8> for Quality {
    type Error = QualityOutOfRange;

    fn try_from(q: u8) -> Result<Self, Self::Error> {
        Quality::new(q)
    }
}

impl From<Quality> for u8 {
    fn from(q: Quality) -> u8 {
        q.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerConfig {
    /// Hints above this count shorten the interval.
    pub hint_threshold: u32,
    pub shorten_factor: f64,
    pub lengthen_factor: f64,
    /// Solve time below `fast_fraction * expected` lengthens the interval.
    pub fast_fraction: f64,
    /// Fraction of expected time at or below which a clean pass grades 5.
    pub quality_fast_fraction: f64,
    pub recall_min: f64,
    pub tau_scale_c: f64,
    pub daily_cap: usize,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            hint_threshold: 2,
            shorten_factor: 0.7,
            lengthen_factor: 1.2,
            fast_fraction: 0.5,
            quality_fast_fraction: 0.75,
            recall_min: 0.6,
            tau_scale_c: 1.0,
            daily_cap: 20,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid scheduler config: {0}")]
pub struct SchedulerConfigError(pub &'static str);

impl SchedulerConfig {
    pub fn validate(&self) -> Result<(), SchedulerConfigError> {
        if !(0.0 < self.shorten_factor && self.shorten_factor < 1.0 && 1.0 < self.lengthen_factor) {
            return Err(SchedulerConfigError("need 0 < shorten_factor < 1 < lengthen_factor"));
        }
        if !(0.0 < self.fast_fraction && self.fast_fraction < 1.0) {
            return Err(SchedulerConfigError("fast_fraction must lie in (0, 1)"));
        }
        if !(0.0 < self.recall_min && self.recall_min < 1.0) {
            return Err(SchedulerConfigError("recall_min must lie in (0, 1)"));
        }
        if !(self.tau_scale_c > 0.0) {
            return Err(SchedulerConfigError("tau_scale_c must be positive"));
        }
        if self.daily_cap == 0 {
            return Err(SchedulerConfigError("daily_cap must be positive"));
        }
        Ok(())
    }
}

/// Grades an attempt: 5 fast clean pass, 4 clean pass, 3 pass with hints,
/// 2 partial fail, 1 total fail, 0 abandoned.
pub fn derive_quality(obs: &Observation, expected_time: f64, config: &SchedulerConfig) -> Quality {
    let q = if obs.abandoned {
        0
    } else if obs.passed {
        if obs.hint_count > 0 {
            3
        } else if obs.solve_time <= config.quality_fast_fraction * expected_time {
            5
        } else {
            4
        }
    } else if obs.tests_passed > 0 {
        2
    } else {
        1
    };
    Quality(q)
}

/// `max(1.3, EF - 0.8 + 0.28q - 0.02q²)`.
pub fn update_ease(ef: f64, q: Quality) -> f64 {
    let q = f64::from(q.0);
    (ef - 0.8 + 0.28 * q - 0.02 * q * q).max(EASE_FLOOR)
}

/// Interval after a review, given the number of reviews completed before it.
pub fn next_interval(n_reviews: u32, prev_interval: u32, ef_new: f64) -> u32 {
    match n_reviews {
        0 => 1,
        1 => 6,
        _ => ((f64::from(prev_interval) * ef_new).round() as u32).max(1),
    }
}

pub fn recall_tau(ef: f64, interval: f64, config: &SchedulerConfig) -> f64 {
    config.tau_scale_c * ef * interval
}

/// `exp(-Δt / τ)` with `τ = c * EF * interval`.
pub fn predict_recall(delta_t: f64, ef: f64, interval: f64, config: &SchedulerConfig) -> f64 {
    (-delta_t.max(0.0) / recall_tau(ef, interval, config)).exp()
}

/// Largest whole-day delay keeping recall at or above `recall_min`.
pub fn prepone_days(tau: f64, recall_min: f64) -> u32 {
    ((-tau * recall_min.ln()).floor() as u32).max(1)
}

/// Applies the hint, speed and recall-threshold adjustments to an SM-2 interval.
pub fn adjust_interval(base: u32, obs: &Observation, expected_time: f64, ef: f64, config: &SchedulerConfig) -> u32 {
    let base = base.max(1);
    let mut days = if obs.hint_count > config.hint_threshold {
        let shortened = (f64::from(base) * config.shorten_factor).ceil() as u32;
        shortened.min(base.saturating_sub(1))
    } else if obs.passed && obs.hint_count == 0 && obs.solve_time < config.fast_fraction * expected_time {
        (f64::from(base) * config.lengthen_factor).round() as u32
    } else {
        base
    }
    .max(1);

    let tau = recall_tau(ef, f64::from(days), config);
    if (-f64::from(days) / tau).exp() < config.recall_min {
        days = days.min(prepone_days(tau, config.recall_min));
    }
    days.max(1)
}

/// Today's review queue and how many due items were pushed past the cap.
#[derive(Debug, Clone, PartialEq)]
pub struct ReviewQueue {
    pub items: Vec<ReviewItem>,
    pub carried: usize,
}

/// Due items ordered by due date then predicted recall (most at risk first),
/// truncated to the daily cap. Truncated items keep their due dates.
pub fn build_review_queue(state: &LearnerState, today: NaiveDate, config: &SchedulerConfig) -> ReviewQueue {
    let mut due: Vec<(f64, &ReviewItem)> = state
        .reviews()
        .iter()
        .filter(|r| r.due_date <= today)
        .map(|r| (r.recall_on(today, config), r))
        .collect();
    due.sort_by(|(ra, a), (rb, b)| {
        a.due_date
            .cmp(&b.due_date)
            .then(ra.total_cmp(rb))
            .then_with(|| a.item_id.cmp(&b.item_id))
    });
    let carried = due.len().saturating_sub(config.daily_cap);
    ReviewQueue {
        items: due.into_iter().take(config.daily_cap).map(|(_, r)| r.clone()).collect(),
        carried,
    }
}
