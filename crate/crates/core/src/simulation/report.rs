use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::curriculum::{coverage_report, Bank, CoverageReport, SelectionLogEntry};
use crate::ids::TopicId;
use crate::learner::LearnerState;
use crate::simulation::metrics::{auroc, brier, ece, median};
use crate::simulation::persona::Persona;
use crate::simulation::runner::{run_trajectory, Trajectory};
use crate::simulation::SimulationError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMetrics {
    pub persona_id: String,
    pub level: String,
    pub tasks: usize,
    pub triggers: usize,
    pub mean_mastery_before: f64,
    pub mean_mastery_after: f64,
    /// Absolute mastery points.
    pub mastery_gain: f64,
    pub overall_success: Option<f64>,
    pub hinted_tasks: usize,
    pub hinted_success: Option<f64>,
    /// Primary-topic mastery against first-attempt correctness.
    pub mastery_brier: Option<f64>,
    pub mastery_ece: Option<f64>,
    pub recall_pairs: usize,
    pub recall_auroc: Option<f64>,
    pub recall_brier: Option<f64>,
    pub recall_ece: Option<f64>,
    pub coverage: CoverageReport,
    pub median_latency_ms: Option<f64>,
    pub cumulative_reward: f64,
    pub final_version: u64,
    pub final_digest: String,
}

fn rate(outcomes: impl Iterator<Item = bool>) -> Option<f64> {
    let (n, k) = outcomes.fold((0usize, 0usize), |(n, k), y| (n + 1, k + usize::from(y)));
    (n > 0).then(|| k as f64 / n as f64)
}

fn topic_gains(before: &LearnerState, after: &LearnerState, bank: &Bank) -> Vec<f64> {
    bank.topics().iter().map(|t| after.m(t) - before.m(t)).collect()
}

fn mastery_pairs(tr: &Trajectory) -> Vec<(f64, bool)> {
    tr.tasks.iter().map(|t| (t.predicted_mastery, t.first_attempt_passed)).collect()
}

fn recall_pairs(tr: &Trajectory) -> Vec<(f64, bool)> {
    tr.tasks
        .iter()
        .filter_map(|t| t.predicted_recall.map(|r| (r, t.first_attempt_passed)))
        .collect()
}

pub fn compute_metrics(tr: &Trajectory, bank: &Bank, config: &EngineConfig) -> TrajectoryMetrics {
    let bins = config.simulation.ece_bins;
    let mp = mastery_pairs(tr);
    let rp = recall_pairs(tr);
    let latencies: Vec<f64> = tr.audit.iter().map(|a| a.wall_time_ms).collect();
    let before = tr.initial_state.mean_mastery();
    let after = tr.final_state.mean_mastery();
    let gains = topic_gains(&tr.initial_state, &tr.final_state, bank);
    TrajectoryMetrics {
        persona_id: tr.persona_id.clone(),
        level: tr.level.clone(),
        tasks: tr.tasks.len(),
        triggers: tr.audit.len(),
        mean_mastery_before: before,
        mean_mastery_after: after,
        mastery_gain: after - before,
        overall_success: rate(tr.tasks.iter().map(|t| t.passed)),
        hinted_tasks: tr.tasks.iter().filter(|t| t.hints > 0).count(),
        hinted_success: rate(tr.tasks.iter().filter(|t| t.hints > 0).map(|t| t.passed)),
        mastery_brier: brier(&mp),
        mastery_ece: ece(&mp, bins),
        recall_pairs: rp.len(),
        recall_auroc: auroc(&rp),
        recall_brier: brier(&rp),
        recall_ece: ece(&rp, bins),
        coverage: coverage_report(&tr.selection_log, bank.topics(), &gains, config.simulation.days),
        median_latency_ms: median(&latencies),
        cumulative_reward: tr.tasks.iter().map(|t| t.reward).sum(),
        final_version: tr.final_state.version(),
        final_digest: tr.audit.last().map(|a| a.state_digest_after.clone()).unwrap_or_default(),
    }
}

/// Aggregate over personas sharing a level label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaSummary {
    pub level: String,
    pub personas: usize,
    pub mean_mastery_before: f64,
    pub mean_mastery_after: f64,
    pub mean_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub days: u32,
    /// Mean over personas of the absolute mastery gain.
    pub mean_mastery_gain: f64,
    pub overall_success: Option<f64>,
    pub hinted_success: Option<f64>,
    pub unhinted_success: Option<f64>,
    pub hinted_tasks: usize,
    pub total_tasks: usize,
    pub mastery_brier: Option<f64>,
    pub mastery_ece: Option<f64>,
    pub recall_pairs: usize,
    pub recall_auroc: Option<f64>,
    pub recall_brier: Option<f64>,
    pub recall_ece: Option<f64>,
    pub min_coverage: f64,
    pub pooled_coverage: CoverageReport,
    pub median_latency_ms: Option<f64>,
    pub cumulative_reward: f64,
    pub by_level: Vec<PersonaSummary>,
    pub personas: Vec<TrajectoryMetrics>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (n, s) = v.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Pooled metrics over completed trajectories.
pub fn summarize(trajectories: &[Trajectory], bank: &Bank, config: &EngineConfig, seed: u64, days: u32) -> SimulationReport {
    let per: Vec<TrajectoryMetrics> = trajectories.iter().map(|t| compute_metrics(t, bank, config)).collect();
    let bins = config.simulation.ece_bins;
    let tasks = || trajectories.iter().flat_map(|t| t.tasks.iter());
    let mp: Vec<_> = trajectories.iter().flat_map(mastery_pairs).collect();
    let rp: Vec<_> = trajectories.iter().flat_map(recall_pairs).collect();
    let latencies: Vec<f64> = trajectories
        .iter()
        .flat_map(|t| t.audit.iter().map(|a| a.wall_time_ms))
        .collect();

    let mut levels: BTreeMap<&str, Vec<&TrajectoryMetrics>> = BTreeMap::new();
    for m in &per {
        levels.entry(m.level.as_str()).or_default().push(m);
    }
    let by_level = levels
        .into_iter()
        .map(|(level, ms)| PersonaSummary {
            level: level.to_owned(),
            personas: ms.len(),
            mean_mastery_before: mean(ms.iter().map(|m| m.mean_mastery_before)),
            mean_mastery_after: mean(ms.iter().map(|m| m.mean_mastery_after)),
            mean_gain: mean(ms.iter().map(|m| m.mastery_gain)),
        })
        .collect();

    // Fairness across learners: one gain per persona.
    let persona_gains: Vec<f64> = per.iter().map(|m| m.mastery_gain).collect();
    let pooled_log: Vec<SelectionLogEntry> = trajectories.iter().flat_map(|t| t.selection_log.iter().cloned()).collect();

    SimulationReport {
        seed,
        days,
        mean_mastery_gain: mean(per.iter().map(|m| m.mastery_gain)),
        overall_success: rate(tasks().map(|t| t.passed)),
        hinted_success: rate(tasks().filter(|t| t.hints > 0).map(|t| t.passed)),
        unhinted_success: rate(tasks().filter(|t| t.hints == 0).map(|t| t.passed)),
        hinted_tasks: tasks().filter(|t| t.hints > 0).count(),
        total_tasks: tasks().count(),
        mastery_brier: brier(&mp),
        mastery_ece: ece(&mp, bins),
        recall_pairs: rp.len(),
        recall_auroc: auroc(&rp),
        recall_brier: brier(&rp),
        recall_ece: ece(&rp, bins),
        min_coverage: per.iter().map(|m| m.coverage.coverage).fold(f64::INFINITY, f64::min).min(1.0),
        pooled_coverage: coverage_report(&pooled_log, bank.topics(), &persona_gains, days),
        median_latency_ms: median(&latencies),
        cumulative_reward: per.iter().map(|m| m.cumulative_reward).sum(),
        by_level,
        personas: per,
    }
}

/// Runs every persona on its own thread and folds the results.
pub fn run_simulation(
    personas: &[Persona],
    days: u32,
    bank: &Bank,
    config: &EngineConfig,
    seed: u64,
) -> Result<(SimulationReport, Vec<Trajectory>), SimulationError> {
    let results: Vec<Result<Trajectory, SimulationError>> = std::thread::scope(|s| {
        let handles: Vec<_> = personas
            .iter()
            .map(|p| s.spawn(move || run_trajectory(p, days, bank, config, seed)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("trajectory thread panicked"))
            .collect()
    });
    let trajectories = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let report = summarize(&trajectories, bank, config, seed, days);
    Ok((report, trajectories))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()
}

#[derive(Serialize)]
struct MetricsRow<'a> {
    persona_id: &'a str,
    level: &'a str,
    tasks: usize,
    mean_mastery_before: f64,
    mean_mastery_after: f64,
    mastery_gain: f64,
    overall_success: String,
    hinted_success: String,
    mastery_brier: String,
    mastery_ece: String,
    recall_auroc: String,
    recall_brier: String,
    coverage: f64,
    diversity: f64,
    median_latency_ms: String,
    cumulative_reward: f64,
}

#[derive(Serialize)]
struct HintRow<'a> {
    group: &'a str,
    tasks: usize,
    success_rate: String,
}

#[derive(Serialize)]
struct TopicRow<'a> {
    topic: &'a TopicId,
    selections: usize,
    share: f64,
}

/// `metrics.json`, `metrics.csv` and the per-figure CSVs.
pub fn write_reports(report: &SimulationReport, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(report)?)?;

    let rows: Vec<MetricsRow> = report
        .personas
        .iter()
        .map(|m| MetricsRow {
            persona_id: &m.persona_id,
            level: &m.level,
            tasks: m.tasks,
            mean_mastery_before: m.mean_mastery_before,
            mean_mastery_after: m.mean_mastery_after,
            mastery_gain: m.mastery_gain,
            overall_success: opt(m.overall_success),
            hinted_success: opt(m.hinted_success),
            mastery_brier: opt(m.mastery_brier),
            mastery_ece: opt(m.mastery_ece),
            recall_auroc: opt(m.recall_auroc),
            recall_brier: opt(m.recall_brier),
            coverage: m.coverage.coverage,
            diversity: m.coverage.diversity,
            median_latency_ms: opt(m.median_latency_ms),
            cumulative_reward: m.cumulative_reward,
        })
        .collect();
    write_csv(&dir.join("metrics.csv"), &rows)?;
    write_csv(&dir.join("fig4_gains_by_level.csv"), &report.by_level)?;

    let hinted = [
        HintRow {
            group: "overall",
            tasks: report.total_tasks,
            success_rate: opt(report.overall_success),
        },
        HintRow {
            group: "with_hints",
            tasks: report.hinted_tasks,
            success_rate: opt(report.hinted_success),
        },
        HintRow {
            group: "without_hints",
            tasks: report.total_tasks - report.hinted_tasks,
            success_rate: opt(report.unhinted_success),
        },
    ];
    write_csv(&dir.join("fig5_hint_effectiveness.csv"), &hinted)?;

    let counts = &report.pooled_coverage.topic_counts;
    let total: usize = counts.values().sum();
    let topics: Vec<TopicRow> = counts
        .iter()
        .map(|(topic, &c)| TopicRow {
            topic,
            selections: c,
            share: if total == 0 { 0.0 } else { c as f64 / total as f64 },
        })
        .collect();
    write_csv(&dir.join("fig6_topic_distribution.csv"), &topics)
}
