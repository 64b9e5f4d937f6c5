use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::Hint;
use crate::curriculum::{Difficulty, ProblemItem};
use crate::ids::TopicId;
use crate::learner::DEFAULT_SOLVE_TIME_SECS;
use crate::observation::{ErrorTag, Observation};
use crate::simulation::SimulationConfig;

const DEFAULT_PERSONAS_JSON: &str = include_str!("../../data/default_personas.json");

/// Upper bound on a persona's learning rate.
pub const MAX_LEARNING_RATE: f64 = 0.2;

/// A parametric simulated learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub persona_id: String,
    /// Grouping label for reports, e.g. "beginner".
    #[serde(default)]
    pub level: String,
    pub skill: BTreeMap<TopicId, f64>,
    pub learning_rate: f64,
    pub hint_responsiveness: f64,
    /// Days.
    pub forgetting_tau: f64,
    pub seed: u64,
    #[serde(default)]
    pub self_reported_skill: Option<f64>,
    /// Probability of skipping a day entirely.
    #[serde(default)]
    pub absence_rate: f64,
}

impl Persona {
    pub fn validate(&self) -> Result<(), String> {
        if let Some((t, s)) = self.skill.iter().find(|(_, s)| !(0.0..=1.0).contains(*s)) {
            return Err(format!("{}: skill {s} on `{t}` outside [0, 1]", self.persona_id));
        }
        if !(0.0..=MAX_LEARNING_RATE).contains(&self.learning_rate) {
            return Err(format!("{}: learning_rate must lie in [0, 0.2]", self.persona_id));
        }
        if !(0.0..=1.0).contains(&self.hint_responsiveness) {
            return Err(format!("{}: hint_responsiveness outside [0, 1]", self.persona_id));
        }
        if !(self.forgetting_tau > 0.0) {
            return Err(format!("{}: forgetting_tau must be positive", self.persona_id));
        }
        if !(0.0..1.0).contains(&self.absence_rate) {
            return Err(format!("{}: absence_rate must lie in [0, 1)", self.persona_id));
        }
        Ok(())
    }

    pub fn mean_skill(&self) -> f64 {
        if self.skill.is_empty() {
            0.0
        } else {
            self.skill.values().sum::<f64>() / self.skill.len() as f64
        }
    }
}

pub fn default_personas() -> Vec<Persona> {
    serde_json::from_str(DEFAULT_PERSONAS_JSON).expect("shipped personas parse")
}

pub fn load_personas(json: &str) -> Result<Vec<Persona>, String> {
    let personas: Vec<Persona> = serde_json::from_str(json).map_err(|e| e.to_string())?;
    for p in &personas {
        p.validate()?;
    }
    Ok(personas)
}

/// Latent skill and practice recency that evolve during a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonaState {
    pub skill: BTreeMap<TopicId, f64>,
    /// Fractional day of last practice per topic.
    pub last_practice: BTreeMap<TopicId, f64>,
}

impl PersonaState {
    pub fn new(persona: &Persona, practiced_at_day: f64) -> Self {
        Self {
            skill: persona.skill.clone(),
            last_practice: persona.skill.keys().map(|t| (t.clone(), practiced_at_day)).collect(),
        }
    }

    /// Skill decayed toward half its value with time since the topic was practised.
    pub fn effective_skill(&self, topic: &TopicId, day: f64, forgetting_tau: f64) -> f64 {
        let s = self.skill.get(topic).copied().unwrap_or(0.0);
        let since = self
            .last_practice
            .get(topic)
            .map_or(f64::INFINITY, |&d| (day - d).max(0.0));
        0.5 * s + 0.5 * s * (-since / forgetting_tau).exp()
    }
}

pub fn difficulty_value(d: Difficulty, config: &SimulationConfig) -> f64 {
    match d {
        Difficulty::Easy => config.difficulty_easy,
        Difficulty::Medium => config.difficulty_medium,
        Difficulty::Hard => config.difficulty_hard,
    }
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `logistic(slope * (skill - difficulty) + level / 5 * boost * responsiveness)`.
pub fn pass_probability(
    effective_skill: f64,
    difficulty: f64,
    hint_level: u8,
    responsiveness: f64,
    config: &SimulationConfig,
) -> f64 {
    let boost = f64::from(hint_level) / 5.0 * config.hint_boost * responsiveness;
    logistic(config.logistic_slope * (effective_skill - difficulty) + boost)
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn mix(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Independent stream per (persona seed, day, item, salt).
pub fn attempt_rng(persona_seed: u64, day: i64, item: &str, salt: u64) -> ChaCha8Rng {
    let mut s = mix(persona_seed);
    s = mix(s ^ day as u64);
    s = mix(s ^ fnv1a(item));
    s = mix(s ^ salt);
    ChaCha8Rng::seed_from_u64(s)
}

/// One attempt at `item`, optionally after a hint. Passing attempts raise
/// the persona's latent skill on every topic of the item.
#[allow(clippy::too_many_arguments)]
pub fn persona_attempt(
    persona: &Persona,
    state: &mut PersonaState,
    item: &ProblemItem,
    hint: Option<&Hint>,
    day: f64,
    at: DateTime<Utc>,
    rng: &mut impl Rng,
    config: &SimulationConfig,
) -> Observation {
    let eff = if item.topics.is_empty() {
        0.0
    } else {
        item.topics
            .iter()
            .map(|t| state.effective_skill(t, day, persona.forgetting_tau))
            .sum::<f64>()
            / item.topics.len() as f64
    };
    let level = hint.map_or(0, |h| h.level);
    let p = pass_probability(
        eff,
        difficulty_value(item.difficulty, config),
        level,
        persona.hint_responsiveness,
        config,
    );
    let passed = rng.random::<f64>() < p;
    let expected = item.expected_solve_time.unwrap_or(DEFAULT_SOLVE_TIME_SECS);
    let u: f64 = rng.random();
    let solve_time = expected * (config.solve_time_low + config.solve_time_span * u);

    let tests_total = item.tests.len().max(1) as u32;
    let (tests_passed, error_tags) = if passed {
        (tests_total, Vec::new())
    } else {
        let partial = rng.random_range(0..tests_total);
        let tag = ErrorTag::VOCABULARY[rng.random_range(0..ErrorTag::VOCABULARY.len())];
        (partial, vec![tag.as_str().to_owned()])
    };

    for t in &item.topics {
        if passed {
            let s = state.skill.entry(t.clone()).or_insert(0.0);
            *s += persona.learning_rate * (1.0 - *s);
        }
        state.last_practice.insert(t.clone(), day);
    }

    Observation {
        item_id: item.id.clone(),
        passed,
        timestamp: at,
        hint_count: u32::from(hint.is_some()),
        error_tags,
        solve_time,
        tests_passed,
        tests_total,
        abandoned: false,
    }
}
