#![allow(dead_code)]

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use mentorgraph::curriculum::{Bank, Difficulty};
use mentorgraph::ids::ItemId;
use mentorgraph::learner::MasteryConfig;
use mentorgraph::observation::Observation;
use mentorgraph::orchestrator::{Trigger, TriggerEvent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 3, 2, 9, 0, 0).unwrap()
}

/// Straight transcription of the update rule, one topic at a time.
#[derive(Debug, Clone)]
pub struct OracleCase {
    pub m: f64,
    pub passed: bool,
    pub difficulty: Difficulty,
    pub dt_secs: i64,
    pub hints: u32,
    pub solve_time: f64,
    pub expected_time: f64,
}

pub fn oracle_update(c: &OracleCase, cfg: &MasteryConfig) -> f64 {
    let w_d = match c.difficulty {
        Difficulty::Easy => cfg.difficulty_weights.easy,
        Difficulty::Medium => cfg.difficulty_weights.medium,
        Difficulty::Hard => cfg.difficulty_weights.hard,
    };
    let dt_days = c.dt_secs as f64 / 86_400.0;
    let w_r = (-dt_days / cfg.recency_tau).exp();
    let m = c.m;
    let new = if c.passed {
        let mut x = m + cfg.learn_rate_alpha * w_d * w_r * (1.0 - m);
        if x > 1.0 {
            x = 1.0;
        }
        x -= cfg.hint_penalty_eta_h * c.hints as f64;
        let over = c.solve_time - c.expected_time;
        if over > 0.0 {
            x -= cfg.time_penalty_eta_t * over;
        }
        x.max(0.0).min(1.0)
    } else {
        let x = m - cfg.forget_rate_beta * (1.0 / w_d) * w_r * m;
        if x < 0.0 {
            0.0
        } else {
            x
        }
    };
    (1.0 - cfg.momentum_lambda) * m + cfg.momentum_lambda * new
}

pub fn random_case(rng: &mut impl Rng) -> OracleCase {
    let difficulty = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard][rng.random_range(0..3)];
    OracleCase {
        m: if rng.random_bool(0.1) { [0.0, 1.0][rng.random_range(0..2)] } else { rng.random() },
        passed: rng.random_bool(0.5),
        difficulty,
        dt_secs: rng.random_range(0..60 * 86_400),
        hints: rng.random_range(0..6),
        solve_time: rng.random_range(0.0..3000.0),
        expected_time: [300.0, 600.0, 900.0][rng.random_range(0..3)],
    }
}

pub fn observation(item: &ItemId, passed: bool, at: DateTime<Utc>, hints: u32, solve_time: f64, total: u32) -> Observation {
    Observation {
        item_id: item.clone(),
        passed,
        timestamp: at,
        hint_count: hints,
        error_tags: if passed { vec![] } else { vec!["off_by_one".into()] },
        solve_time,
        tests_passed: if passed { total } else { total.saturating_sub(1) },
        tests_total: total,
        abandoned: false,
    }
}

/// A random but well-formed trigger stream over `bank`, timestamps strictly increasing.
pub struct TriggerStream {
    rng: ChaCha8Rng,
    clock: DateTime<Utc>,
    items: Vec<ItemId>,
    totals: Vec<u32>,
}

impl TriggerStream {
    pub fn new(bank: &Bank, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            clock: t0(),
            items: bank.items().iter().map(|i| i.id.clone()).collect(),
            totals: bank.items().iter().map(|i| i.tests.len() as u32).collect(),
        }
    }

    fn date(&self) -> NaiveDate {
        self.clock.date_naive()
    }

    pub fn next_trigger(&mut self) -> Trigger {
        let step = if self.rng.random_bool(0.05) { 86_400 } else { self.rng.random_range(1..3600) };
        self.clock += Duration::seconds(step);
        let k = self.rng.random_range(0..self.items.len());
        let item = self.items[k].clone();
        let obs = observation(
            &item,
            self.rng.random_bool(0.6),
            self.clock,
            self.rng.random_range(0..4),
            self.rng.random_range(30.0..1500.0),
            self.totals[k],
        );
        let event = match self.rng.random_range(0..5) {
            0 => TriggerEvent::OnSubmission { observation: obs },
            1 => TriggerEvent::OnHintRequest {
                item_id: item,
                hint_history: self.rng.random_range(0..6),
            },
            2 => TriggerEvent::OnSessionCheck { date: self.date() },
            3 => TriggerEvent::OnDailyGeneration { date: self.date() },
            _ => TriggerEvent::OnReviewDue {
                date: self.date(),
                observation: self.rng.random_bool(0.7).then_some(obs),
            },
        };
        Trigger::new(self.clock, self.rng.random(), event)
    }
}
