//! Mastery initialization from history and the per-observation update
//! pipeline (difficulty/recency-weighted step, penalties, momentum).

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{LearnerState, TopicMastery};
use crate::curriculum::{Difficulty, ProblemItem};
use crate::ids::{ItemId, TopicId};
use crate::observation::Observation;
use crate::time::days_between;

/// Attempts that count as "recent" for initialization and the solve-time median.
pub const RECENT_WINDOW: usize = 10;

/// Expected solve time used when neither the item nor the learner's history provides one.
pub const DEFAULT_SOLVE_TIME_SECS: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DifficultyWeights {
    pub easy: f64,
    pub medium: f64,
    pub hard: f64,
}

impl Default for DifficultyWeights {
    fn default() -> Self {
        Self {
            easy: 0.8,
            medium: 1.0,
            hard: 1.2,
        }
    }
}

impl DifficultyWeights {
    pub fn weight(&self, difficulty: Difficulty) -> f64 {
        match difficulty {
            Difficulty::Easy => self.easy,
            Difficulty::Medium => self.medium,
            Difficulty::Hard => self.hard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MasteryConfig {
    pub learn_rate_alpha: f64,
    pub forget_rate_beta: f64,
    pub difficulty_weights: DifficultyWeights,
    /// Days.
    pub recency_tau: f64,
    /// Mastery lost per hint used on a passing attempt.
    pub hint_penalty_eta_h: f64,
    /// Mastery lost per second beyond the expected solve time on a passing attempt.
    pub time_penalty_eta_t: f64,
    pub momentum_lambda: f64,
    pub init_noise_sigma0: f64,
}

impl Default for MasteryConfig {
    fn default() -> Self {
        Self {
            learn_rate_alpha: 0.2,
            forget_rate_beta: 0.2,
            difficulty_weights: DifficultyWeights::default(),
            recency_tau: 14.0,
            hint_penalty_eta_h: 0.02,
            time_penalty_eta_t: 0.0001,
            momentum_lambda: 0.7,
            init_noise_sigma0: 0.05,
        }
    }
}

impl MasteryConfig {
    pub fn validate(&self) -> Result<(), MasteryError> {
        let bad = |what: &'static str| Err(MasteryError::InvalidConfig(what));
        if !(self.learn_rate_alpha > 0.0) {
            return bad("learn_rate_alpha must be positive");
        }
        if !(self.forget_rate_beta > 0.0) {
            return bad("forget_rate_beta must be positive");
        }
        let w = self.difficulty_weights;
        if !(w.easy > 0.0 && w.medium > 0.0 && w.hard > 0.0) {
            return bad("difficulty weights must be positive");
        }
        if !(self.recency_tau > 0.0) {
            return bad("recency_tau must be positive");
        }
        if !(self.hint_penalty_eta_h >= 0.0 && self.time_penalty_eta_t >= 0.0) {
            return bad("penalties must be non-negative");
        }
        if !(self.momentum_lambda > 0.0 && self.momentum_lambda <= 1.0) {
            return bad("momentum_lambda must lie in (0, 1]");
        }
        if !(self.init_noise_sigma0 >= 0.0) {
            return bad("init_noise_sigma0 must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MasteryError {
    #[error("observation for `{item}` carries no topic tags")]
    EmptyTopics { item: ItemId },
    #[error("topic `{0}` is not tracked in the mastery map")]
    UnknownTopic(TopicId),
    #[error("observation is for `{observed}` but item `{item}` was supplied")]
    ItemMismatch { observed: ItemId, item: ItemId },
    #[error("solve time must be non-negative, got {0}")]
    NegativeSolveTime(f64),
    #[error("observation at {observed} precedes the last state update at {updated}")]
    TimestampRegression {
        observed: DateTime<Utc>,
        updated: DateTime<Utc>,
    },
    #[error("invalid mastery config: {0}")]
    InvalidConfig(&'static str),
}

/// A historical attempt with its topic tags, used for initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedObservation {
    pub topics: Vec<TopicId>,
    #[serde(flatten)]
    pub observation: Observation,
}

/// Computed change to one topic's mastery; applied later by the orchestrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasteryDelta {
    pub topic: TopicId,
    pub before: f64,
    pub after: f64,
    pub passed: bool,
    pub observed_at: DateTime<Utc>,
    pub solve_time: f64,
    pub rationale: Vec<String>,
}

/// Initial mastery per topic: `0.6 * success_rate + 0.4 * recent_success_rate + noise`,
/// clamped to `[0, 1]`. Topics in `topics` without history start cold.
pub fn init_mastery(
    history: &[TaggedObservation],
    topics: &BTreeSet<TopicId>,
    config: &MasteryConfig,
    seed: u64,
    now: DateTime<Utc>,
) -> Result<BTreeMap<TopicId, TopicMastery>, MasteryError> {
    config.validate()?;
    let mut per_topic: BTreeMap<&TopicId, Vec<&Observation>> = BTreeMap::new();
    for entry in history {
        if entry.topics.is_empty() {
            return Err(MasteryError::EmptyTopics {
                item: entry.observation.item_id.clone(),
            });
        }
        for topic in &entry.topics {
            if !topics.is_empty() && !topics.contains(topic) {
                return Err(MasteryError::UnknownTopic(topic.clone()));
            }
            per_topic.entry(topic).or_default().push(&entry.observation);
        }
    }

    let noise = (config.init_noise_sigma0 > 0.0)
        .then(|| Normal::new(0.0, config.init_noise_sigma0).expect("sigma is finite and positive"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut out = BTreeMap::new();
    for topic in topics {
        out.insert(topic.clone(), TopicMastery::cold(topic.clone(), now));
    }
    for (topic, mut attempts) in per_topic {
        attempts.sort_by_key(|o| o.timestamp);
        let rate = |xs: &[&Observation]| xs.iter().filter(|o| o.passed).count() as f64 / xs.len() as f64;
        let recent = &attempts[attempts.len().saturating_sub(RECENT_WINDOW)..];
        let mut m = 0.6 * rate(&attempts) + 0.4 * rate(recent);
        if let Some(normal) = &noise {
            m += normal.sample(&mut rng);
        }
        let last = attempts.last().expect("non-empty by construction");
        out.insert(
            topic.clone(),
            TopicMastery {
                topic_id: topic.clone(),
                m: m.clamp(0.0, 1.0),
                alpha_count: 1.0,
                beta_count: 1.0,
                last_update: last.timestamp,
                recent_solve_times: recent.iter().map(|o| o.solve_time).collect(),
            },
        );
    }
    Ok(out)
}

/// Expected solve time for `topic`: the item's value, else the median of the
/// learner's recent solve times, else [`DEFAULT_SOLVE_TIME_SECS`].
fn expected_solve_time(item: &ProblemItem, topic: &TopicMastery) -> f64 {
    if let Some(t) = item.expected_solve_time {
        return t;
    }
    let mut times = topic.recent_solve_times.clone();
    if times.is_empty() {
        return DEFAULT_SOLVE_TIME_SECS;
    }
    times.sort_by(f64::total_cmp);
    let n = times.len();
    if n % 2 == 1 {
        times[n / 2]
    } else {
        0.5 * (times[n / 2 - 1] + times[n / 2])
    }
}

/// Runs the mastery update for every topic tagged on `item` and returns the
/// resulting deltas. The state is only read.
pub fn apply_observation(
    state: &LearnerState,
    obs: &Observation,
    item: &ProblemItem,
    config: &MasteryConfig,
) -> Result<Vec<MasteryDelta>, MasteryError> {
    if obs.item_id != item.id {
        return Err(MasteryError::ItemMismatch {
            observed: obs.item_id.clone(),
            item: item.id.clone(),
        });
    }
    if item.topics.is_empty() {
        return Err(MasteryError::EmptyTopics { item: item.id.clone() });
    }
    if !(obs.solve_time >= 0.0) || !obs.solve_time.is_finite() {
        return Err(MasteryError::NegativeSolveTime(obs.solve_time));
    }
    if obs.timestamp < state.updated_at {
        return Err(MasteryError::TimestampRegression {
            observed: obs.timestamp,
            updated: state.updated_at,
        });
    }

    let w_d = config.difficulty_weights.weight(item.difficulty);
    let lambda = config.momentum_lambda;
    let mut deltas = Vec::with_capacity(item.topics.len());
    for topic in &item.topics {
        let tm = state
            .mastery
            .get(topic)
            .ok_or_else(|| MasteryError::UnknownTopic(topic.clone()))?;
        let m = tm.m;
        let dt = days_between(tm.last_update, obs.timestamp).max(0.0);
        let w_r = (-dt / config.recency_tau).exp();
        let mut rationale = vec![if obs.passed { "pass" } else { "fail" }.to_owned()];
        rationale.push(format!("difficulty:{}", item.difficulty.as_str()));
        rationale.push(format!("recency:{w_r:.3}"));

        let candidate = if obs.passed {
            let raw = (m + config.learn_rate_alpha * w_d * w_r * (1.0 - m)).min(1.0);
            let hint_pen = config.hint_penalty_eta_h * f64::from(obs.hint_count);
            let over = (obs.solve_time - expected_solve_time(item, tm)).max(0.0);
            let time_pen = config.time_penalty_eta_t * over;
            if hint_pen > 0.0 {
                rationale.push(format!("hint-penalty:{hint_pen:.4}"));
            }
            if time_pen > 0.0 {
                rationale.push(format!("time-penalty:{time_pen:.4}"));
            }
            (raw - hint_pen - time_pen).clamp(0.0, 1.0)
        } else {
            (m - config.forget_rate_beta / w_d * w_r * m).max(0.0)
        };
        let after = (1.0 - lambda) * m + lambda * candidate;

        deltas.push(MasteryDelta {
            topic: topic.clone(),
            before: m,
            after,
            passed: obs.passed,
            observed_at: obs.timestamp,
            solve_time: obs.solve_time,
            rationale,
        });
    }
    Ok(deltas)
}

/// Mean and variance of the topic's Beta(alpha, beta) evidence distribution.
pub fn uncertainty(topic: &TopicMastery) -> (f64, f64) {
    let (a, b) = (topic.alpha_count, topic.beta_count);
    let s = a + b;
    (a / s, a * b / (s * s * (s + 1.0)))
}
