use chrono::{DateTime, Duration, NaiveDate, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{DeterministicAgents, Hint, MAX_HINT_LEVEL};
use crate::config::EngineConfig;
use crate::curriculum::{Bank, DailySet, Difficulty, ProblemItem, SelectionLogEntry, SlotKind};
use crate::ids::ItemId;
use crate::learner::{init_mastery, LearnerState, LearnerStateBuilder, Preferences, TaggedObservation};
use crate::observation::Observation;
use crate::orchestrator::{Action, AuditRecord, Orchestrator, Trigger, TriggerEvent};
use crate::scheduler::predict_recall;
use crate::simulation::persona::{attempt_rng, persona_attempt, Persona, PersonaState};
use crate::simulation::{reward, SimulationError};
use crate::time::{add_days, date_diff, start_of_day};

/// One assigned item worked to completion (possibly with hints).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub day: u32,
    pub item_id: ItemId,
    pub slot: SlotKind,
    pub first_attempt_passed: bool,
    pub passed: bool,
    pub hints: u32,
    pub attempts: u32,
    /// Primary-topic mastery just before the first attempt.
    pub predicted_mastery: f64,
    /// Forgetting-curve recall for scheduled review attempts.
    pub predicted_recall: Option<f64>,
    pub delta_mastery: f64,
    pub reward: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub persona_id: String,
    pub level: String,
    pub initial_state: LearnerState,
    pub final_state: LearnerState,
    pub audit: Vec<AuditRecord>,
    pub tasks: Vec<TaskRecord>,
    pub selection_log: Vec<SelectionLogEntry>,
}

fn trigger_seed(run_seed: u64, persona_seed: u64, day: u32, salt: u64) -> u64 {
    use rand::RngCore;
    attempt_rng(run_seed ^ persona_seed.rotate_left(17), i64::from(day), "trigger", salt).next_u64()
}

fn fractional_day(start: NaiveDate, at: DateTime<Utc>) -> f64 {
    (at - start_of_day(start)).num_milliseconds() as f64 / 86_400_000.0
}

fn pretest(
    persona: &Persona,
    bank: &Bank,
    config: &EngineConfig,
    at: DateTime<Utc>,
    seed: u64,
) -> Vec<TaggedObservation> {
    let sim = &config.simulation;
    let mut scratch = PersonaState::new(persona, -1.0);
    let mut out = Vec::new();
    for topic in bank.topics() {
        for k in 0..sim.pretest_attempts {
            let id = format!("pretest/{topic}/{k}");
            let mut item = ProblemItem::minimal(&id, &[topic.as_str()], Difficulty::Medium);
            item.expected_solve_time = Some(600.0);
            let mut rng = attempt_rng(persona.seed, -1, &id, seed);
            let ts = at + Duration::seconds(i64::from(k));
            let before = scratch.clone();
            let obs = persona_attempt(persona, &mut scratch, &item, None, -1.0, ts, &mut rng, sim);
            // Pretest measures; it does not teach.
            scratch = before;
            out.push(TaggedObservation {
                topics: item.topics.clone(),
                observation: obs,
            });
        }
    }
    out
}

/// Initial learner state from a pretest of the persona.
pub(crate) fn initial_state(persona: &Persona, bank: &Bank, config: &EngineConfig, seed: u64) -> Result<LearnerState, SimulationError> {
    let start = config.simulation.start_date;
    let pretest_at = start_of_day(add_days(start, -1)) + Duration::hours(12);
    let history = pretest(persona, bank, config, pretest_at, seed);
    let created = pretest_at + Duration::hours(1);
    let mastery = init_mastery(&history, bank.topics(), &config.mastery, seed ^ persona.seed, created)?;
    let mean = persona.mean_skill();
    Ok(LearnerStateBuilder::new(persona.persona_id.clone(), created)
        .mastery(mastery)
        .preferences(Preferences {
            self_reported_skill: persona.self_reported_skill.unwrap_or(mean).clamp(0.0, 1.0),
            expertise_rank: mean.clamp(0.0, 1.0),
            ..Preferences::default()
        })
        .build())
}

struct Run<'a> {
    orch: Orchestrator<'a, DeterministicAgents>,
    persona: &'a Persona,
    pstate: PersonaState,
    config: &'a EngineConfig,
    start: NaiveDate,
    seed: u64,
}

impl Run<'_> {
    fn fire(&mut self, at: DateTime<Utc>, seed: u64, event: TriggerEvent) -> AuditRecord {
        self.orch.dispatch(Trigger::new(at, seed, event))
    }

    fn attempt(&mut self, item: &ProblemItem, hint: Option<&Hint>, day: u32, n: u32, at: DateTime<Utc>) -> Observation {
        let mut rng = attempt_rng(self.persona.seed, i64::from(day), item.id.as_str(), self.seed.wrapping_add(u64::from(n)));
        let t = fractional_day(self.start, at);
        persona_attempt(self.persona, &mut self.pstate, item, hint, t, at, &mut rng, &self.config.simulation)
    }

    fn task(&mut self, day: u32, date: NaiveDate, item: &ProblemItem, slot: SlotKind, clock: &mut DateTime<Utc>) -> TaskRecord {
        let primary = item.primary_topic().clone();
        let state = self.orch.state();
        let predicted_mastery = state.m(&primary);
        let predicted_recall = match (slot, state.review(&item.id)) {
            (SlotKind::Review, Some(r)) => Some(predict_recall(
                date_diff(r.last_review_date(), date) as f64,
                r.ease_factor,
                f64::from(r.interval_days),
                &self.config.scheduler,
            )),
            _ => None,
        };

        let mut obs = self.attempt(item, None, day, 0, *clock);
        *clock += Duration::milliseconds((obs.solve_time * 1000.0) as i64);
        obs.timestamp = *clock;
        self.fire(*clock, 0, TriggerEvent::OnSubmission { observation: obs.clone() });
        let first_attempt_passed = obs.passed;
        let mut hints = 0u32;
        let mut attempts = 1u32;

        let mut decide = attempt_rng(self.persona.seed, i64::from(day), item.id.as_str(), self.seed ^ 0x4849_4e54);
        if !obs.passed && decide.random::<f64>() < self.persona.hint_responsiveness {
            while !obs.passed && hints < u32::from(MAX_HINT_LEVEL) {
                *clock += Duration::seconds(20);
                let rec = self.fire(
                    *clock,
                    0,
                    TriggerEvent::OnHintRequest {
                        item_id: item.id.clone(),
                        hint_history: hints,
                    },
                );
                let Some(hint) = rec.actions().find_map(|a| match a {
                    Action::Hint { hint } => Some(hint.clone()),
                    _ => None,
                }) else {
                    break;
                };
                hints += 1;
                obs = self.attempt(item, Some(&hint), day, attempts, *clock);
                *clock += Duration::milliseconds((obs.solve_time * 1000.0) as i64);
                obs.timestamp = *clock;
                obs.hint_count = hints;
                self.fire(*clock, 0, TriggerEvent::OnSubmission { observation: obs.clone() });
                attempts += 1;
            }
        }

        let review_due = self.orch.state().review(&item.id).is_none_or(|r| r.due_date <= date);
        if review_due {
            *clock += Duration::seconds(1);
            self.fire(
                *clock,
                0,
                TriggerEvent::OnReviewDue {
                    date,
                    observation: Some(obs.clone()),
                },
            );
        }
        *clock += Duration::minutes(2);

        let delta_mastery = self.orch.state().m(&primary) - predicted_mastery;
        let review_success = slot == SlotKind::Review && obs.passed;
        TaskRecord {
            day,
            item_id: item.id.clone(),
            slot,
            first_attempt_passed,
            passed: obs.passed,
            hints,
            attempts,
            predicted_mastery,
            predicted_recall,
            delta_mastery,
            reward: reward(delta_mastery, review_success, hints, obs.solve_time, &self.config.reward),
        }
    }
}

/// Simulates `days` days of one persona, every trigger going through the orchestrator.
pub fn run_trajectory(
    persona: &Persona,
    days: u32,
    bank: &Bank,
    config: &EngineConfig,
    seed: u64,
) -> Result<Trajectory, SimulationError> {
    if days == 0 {
        return Err(SimulationError::NoDays);
    }
    persona.validate().map_err(SimulationError::Persona)?;
    let initial = initial_state(persona, bank, config, seed)?;
    let start = config.simulation.start_date;
    let mut run = Run {
        orch: Orchestrator::new(initial.clone(), bank, config, DeterministicAgents),
        persona,
        pstate: PersonaState::new(persona, -1.0),
        config,
        start,
        seed,
    };
    let mut tasks = Vec::new();
    let mut selection_log = Vec::new();

    for day in 0..days {
        let date = add_days(start, i64::from(day));
        let morning = start_of_day(date) + Duration::hours(8);
        run.fire(morning, trigger_seed(seed, persona.seed, day, 1), TriggerEvent::OnSessionCheck { date });

        let mut absent = attempt_rng(persona.seed, i64::from(day), "absence", seed);
        if absent.random::<f64>() < persona.absence_rate {
            continue;
        }
        let rec = run.fire(
            morning + Duration::minutes(5),
            trigger_seed(seed, persona.seed, day, 2),
            TriggerEvent::OnDailyGeneration { date },
        );
        let set: Option<DailySet> = rec.actions().find_map(|a| match a {
            Action::RecommendItems { set } => Some(set.clone()),
            _ => None,
        });
        let Some(set) = set else { continue };

        let mut clock = start_of_day(date) + Duration::hours(9);
        for assigned in &set.items {
            let Some(item) = bank.get(&assigned.item_id) else { continue };
            selection_log.push(SelectionLogEntry {
                date,
                item_id: item.id.clone(),
                topics: item.topics.clone(),
            });
            tasks.push(run.task(day, date, item, assigned.slot, &mut clock));
        }
    }

    let (final_state, audit) = run.orch.into_parts();
    Ok(Trajectory {
        persona_id: persona.persona_id.clone(),
        level: persona.level.clone(),
        initial_state: initial,
        final_state,
        audit,
        tasks,
        selection_log,
    })
}
