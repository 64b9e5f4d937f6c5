use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use chrono::{DateTime, Duration, NaiveDate, Utc};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use mentorgraph::agents::backend_from_config;
use mentorgraph::curriculum::Bank;
use mentorgraph::learner::{
    init_mastery, proficiency, LearnerStateBuilder, Preferences, TaggedObservation,
};
use mentorgraph::orchestrator::{
    Action, AuditRecord, CommitStatus, Orchestrator, Trigger, TriggerEvent,
};
use mentorgraph::scheduler::build_review_queue;
use mentorgraph::simulation::{load_personas, run_simulation, write_reports};
use mentorgraph::store::{reconstruct, state_digest, EventRecord, StateDir};
use mentorgraph::time::start_of_day;
use mentorgraph::{EngineConfig, ItemId, LearnerState, Observation};

#[derive(Parser)]
#[command(
    name = "mentorgraph",
    version,
    about = "Adaptive tutoring engine over a versioned learner state"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a learner directory from a profile and a problem bank.
    Init {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Engine configuration; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generate and print the day's problem set.
    Daily {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        date: NaiveDate,
        #[arg(long)]
        at: Option<DateTime<Utc>>,
    },
    /// Record a graded submission.
    Submit {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        item: String,
        #[arg(long, action = clap::ArgAction::Set)]
        passed: bool,
        /// Passed/total, e.g. 3/4.
        #[arg(long)]
        tests: String,
        #[arg(long)]
        time_ms: u64,
        #[arg(long, default_value_t = 0)]
        hints: u32,
        #[arg(long, value_delimiter = ',')]
        errors: Vec<String>,
        /// Submission time; defaults to now.
        #[arg(long)]
        at: Option<DateTime<Utc>>,
    },
    /// Request the next hint for an item.
    Hint {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        item: String,
        #[arg(long)]
        at: Option<DateTime<Utc>>,
    },
    /// Run the engagement check for a day.
    SessionCheck {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        date: NaiveDate,
        #[arg(long)]
        at: Option<DateTime<Utc>>,
    },
    /// Forecast the reviews due on a day.
    ReviewDue {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        date: NaiveDate,
        #[arg(long)]
        at: Option<DateTime<Utc>>,
    },
    /// Run seeded persona trajectories and write metrics.
    Simulate {
        #[arg(long)]
        personas: PathBuf,
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        days: u32,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Summarize the learner state.
    Report {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Replay the event log and verify every recorded digest.
    Replay {
        #[arg(long)]
        state: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Input to `init`: who the learner is and what is already known about them.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Profile {
    learner_id: String,
    /// Defaults to just after the latest history entry, or now.
    #[serde(default)]
    created_at: Option<DateTime<Utc>>,
    #[serde(default)]
    preferences: Option<Preferences>,
    /// Past graded attempts used to initialize mastery.
    #[serde(default)]
    history: Vec<TaggedObservation>,
}

fn load_config(path: Option<&Path>) -> Result<EngineConfig> {
    match path {
        Some(p) => EngineConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(EngineConfig::default()),
    }
}

fn init(profile: &Path, bank: &Path, dir: &Path, seed: u64, config: Option<&Path>) -> Result<()> {
    let config = load_config(config)?;
    let bank = Bank::load(bank).with_context(|| format!("loading bank {}", bank.display()))?;
    let text =
        fs::read_to_string(profile).with_context(|| format!("reading {}", profile.display()))?;
    let profile: Profile = serde_json::from_str(&text).context("parsing profile")?;
    let created = profile.created_at.unwrap_or_else(|| {
        profile
            .history
            .iter()
            .map(|h| h.observation.timestamp + Duration::seconds(1))
            .max()
            .unwrap_or_else(Utc::now)
    });
    let mastery = init_mastery(
        &profile.history,
        bank.topics(),
        &config.mastery,
        seed,
        created,
    )?;
    let mut builder = LearnerStateBuilder::new(profile.learner_id, created).mastery(mastery);
    if let Some(p) = profile.preferences {
        builder = builder.preferences(p);
    }
    let state = builder.build();
    StateDir::new(dir).init(&state, &config, &bank)?;
    println!(
        "initialized {} at version {} ({})",
        dir.display(),
        state.version(),
        state_digest(&state)
    );
    Ok(())
}

/// Loads the learner, dispatches one trigger and persists the result.
fn dispatch(
    dir: &Path,
    make: impl FnOnce(&LearnerState, &[EventRecord]) -> Result<Trigger>,
) -> Result<AuditRecord> {
    let mut records = dispatch_then(dir, make, |_, _| None)?;
    Ok(records.remove(0))
}

/// Dispatches `make`, then the trigger `then` derives from the committed state, under one lock.
fn dispatch_then(
    dir: &Path,
    make: impl FnOnce(&LearnerState, &[EventRecord]) -> Result<Trigger>,
    then: impl FnOnce(&LearnerState, &AuditRecord) -> Option<Trigger>,
) -> Result<Vec<AuditRecord>> {
    let sd = StateDir::new(dir);
    let lock = sd.lock()?;
    let config = sd.load_config()?;
    let bank = sd.load_bank()?;
    let state = sd.load_snapshot()?;
    let (mut log, records) = sd.open_log()?;
    if log.last_version() != state.version() {
        bail!(
            "snapshot is at version {} but the log ends at {}; run `replay` to diagnose",
            state.version(),
            log.last_version()
        );
    }
    let trigger = make(&state, &records)?;
    let backend = backend_from_config(&config.agents)?;
    let mut orch = Orchestrator::new(state, &bank, &config, backend).without_log();
    let record = orch.dispatch(trigger);
    sd.record(&lock, &mut log, &record, orch.state())?;
    let mut out = vec![record];
    if let Some(next) = then(orch.state(), &out[0]) {
        let record = orch.dispatch(next);
        sd.record(&lock, &mut log, &record, orch.state())?;
        out.push(record);
    }
    Ok(out)
}

fn trigger_seed(state: &LearnerState) -> u64 {
    (state.version() + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn date_trigger(
    state: &LearnerState,
    date: NaiveDate,
    at: Option<DateTime<Utc>>,
    event: TriggerEvent,
) -> Trigger {
    let at = at.unwrap_or_else(|| start_of_day(date).max(state.updated_at()));
    Trigger::new(at, trigger_seed(state), event)
}

fn parse_tests(s: &str) -> Result<(u32, u32)> {
    let (p, t) = s.split_once('/').context("--tests takes PASSED/TOTAL")?;
    Ok((p.trim().parse()?, t.trim().parse()?))
}

/// Hints shown for `item` since its last passing submission.
fn hints_since_pass(records: &[EventRecord], item: &ItemId) -> u32 {
    let mut n = 0;
    for r in records {
        match &r.payload.event {
            TriggerEvent::OnHintRequest { item_id, .. } if item_id == item => n += 1,
            TriggerEvent::OnSubmission { observation }
                if &observation.item_id == item && observation.passed =>
            {
                n = 0
            }
            _ => {}
        }
    }
    n
}

fn print_record(record: &AuditRecord) {
    let accepted = record.accepted().count();
    let status = match &record.status {
        CommitStatus::Committed => "committed".to_owned(),
        CommitStatus::Failed { reason } => format!("commit failed: {reason}"),
    };
    println!(
        "v{} {}: {status}, {accepted}/{} proposals accepted",
        record.version_after,
        record.trigger.kind(),
        record.proposals.len()
    );
    for action in record.actions() {
        match action {
            Action::RecommendItems { set } => {
                println!(
                    "daily set {} ({} items, shortfall {})",
                    set.date,
                    set.items.len(),
                    set.shortfall
                );
                for a in &set.items {
                    println!(
                        "  {:<11} {}",
                        format!("{:?}", a.slot).to_lowercase(),
                        a.item_id
                    );
                }
            }
            Action::Hint { hint } => {
                println!("hint level {} ({:?}): {}", hint.level, hint.tier, hint.text)
            }
            Action::Feedback { message, .. } => println!("feedback: {message}"),
            other => println!("{}", serde_json::to_string(other).unwrap_or_default()),
        }
    }
}

#[derive(Serialize)]
struct Report<'a> {
    learner_id: &'a str,
    version: u64,
    digest: String,
    proficiency: f64,
    mastery: BTreeMap<&'a str, f64>,
    reviews: Vec<ReviewRow<'a>>,
    audit: AuditSummary,
}

#[derive(Serialize)]
struct ReviewRow<'a> {
    item_id: &'a str,
    due_date: NaiveDate,
    interval_days: u32,
    ease_factor: f64,
}

#[derive(Serialize, Default)]
struct AuditSummary {
    events: usize,
    by_kind: BTreeMap<String, usize>,
    rejected_proposals: usize,
    failed_commits: usize,
    median_latency_ms: Option<f64>,
}

fn report(dir: &Path, format: Format) -> Result<()> {
    let sd = StateDir::new(dir);
    let config = sd.load_config()?;
    let state = sd.load_snapshot()?;
    let events = sd.read_events()?;
    let mut audit = AuditSummary {
        events: events.len(),
        ..AuditSummary::default()
    };
    for e in &events {
        *audit.by_kind.entry(e.trigger_kind.to_string()).or_default() += 1;
        audit.rejected_proposals += e.rejected.len();
        audit.failed_commits += usize::from(e.commit_error.is_some());
    }
    audit.median_latency_ms =
        mentorgraph::simulation::median(&events.iter().map(|e| e.latency_ms).collect::<Vec<_>>());
    let mut reviews: Vec<_> = state
        .reviews()
        .iter()
        .map(|r| ReviewRow {
            item_id: r.item_id.as_str(),
            due_date: r.due_date,
            interval_days: r.interval_days,
            ease_factor: r.ease_factor,
        })
        .collect();
    reviews.sort_by(|a, b| a.due_date.cmp(&b.due_date).then(a.item_id.cmp(b.item_id)));
    let report = Report {
        learner_id: state.learner_id(),
        version: state.version(),
        digest: state_digest(&state),
        proficiency: proficiency(&state, &config.proficiency),
        mastery: state
            .mastery()
            .iter()
            .map(|(t, m)| (t.as_str(), m.m))
            .collect(),
        reviews,
        audit,
    };
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            w.write_record(["section", "key", "value"])?;
            let row =
                |w: &mut csv::Writer<_>, s: &str, k: &str, v: String| w.write_record([s, k, &v]);
            row(
                &mut w,
                "learner",
                "learner_id",
                report.learner_id.to_owned(),
            )?;
            row(&mut w, "learner", "version", report.version.to_string())?;
            row(&mut w, "learner", "digest", report.digest.clone())?;
            row(
                &mut w,
                "learner",
                "proficiency",
                report.proficiency.to_string(),
            )?;
            for (t, m) in &report.mastery {
                row(&mut w, "mastery", t, m.to_string())?;
            }
            for r in &report.reviews {
                row(&mut w, "review", r.item_id, r.due_date.to_string())?;
            }
            row(&mut w, "audit", "events", report.audit.events.to_string())?;
            for (k, n) in &report.audit.by_kind {
                row(&mut w, "audit", k, n.to_string())?;
            }
            row(
                &mut w,
                "audit",
                "rejected_proposals",
                report.audit.rejected_proposals.to_string(),
            )?;
            row(
                &mut w,
                "audit",
                "failed_commits",
                report.audit.failed_commits.to_string(),
            )?;
            w.flush()?;
        }
    }
    Ok(())
}

fn replay(dir: &Path) -> Result<()> {
    let sd = StateDir::new(dir);
    let config = sd.load_config()?;
    let bank = sd.load_bank()?;
    let initial = sd.load_initial()?;
    let events = sd.read_events()?;
    let replayed = reconstruct(
        initial,
        &events,
        &bank,
        &config,
        backend_from_config(&config.agents)?,
    )?;
    let snapshot = sd.load_snapshot()?;
    let (got, want) = (state_digest(&replayed), state_digest(&snapshot));
    ensure!(
        got == want,
        "log replays to version {} ({got}) but the snapshot is version {} ({want})",
        replayed.version(),
        snapshot.version()
    );
    println!(
        "consistent: {} events, version {}, digest {got}",
        events.len(),
        replayed.version()
    );
    Ok(())
}

fn simulate(
    personas: &Path,
    bank: &Path,
    days: u32,
    seed: u64,
    out: &Path,
    config: Option<&Path>,
) -> Result<()> {
    let config = load_config(config)?;
    let bank = Bank::load(bank).with_context(|| format!("loading bank {}", bank.display()))?;
    let text =
        fs::read_to_string(personas).with_context(|| format!("reading {}", personas.display()))?;
    let personas = load_personas(&text).map_err(anyhow::Error::msg)?;
    let (report, _) = run_simulation(&personas, days, &bank, &config, seed)?;
    write_reports(&report, out)?;
    println!(
        "{} personas x {days} days: mean gain {:+.4}, success {:.3} (hinted {:.3}), min coverage {:.2}, recall AUROC {}",
        report.personas.len(),
        report.mean_mastery_gain,
        report.overall_success.unwrap_or(f64::NAN),
        report.hinted_success.unwrap_or(f64::NAN),
        report.min_coverage,
        report.recall_auroc.map_or("n/a".into(), |a| format!("{a:.3}")),
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Init {
            profile,
            bank,
            state,
            seed,
            config,
        } => init(&profile, &bank, &state, seed, config.as_deref()),
        Command::Daily { state, date, at } => {
            let rec = dispatch(&state, |s, _| {
                Ok(date_trigger(
                    s,
                    date,
                    at,
                    TriggerEvent::OnDailyGeneration { date },
                ))
            })?;
            print_record(&rec);
            Ok(())
        }
        Command::SessionCheck { state, date, at } => {
            let rec = dispatch(&state, |s, _| {
                Ok(date_trigger(
                    s,
                    date,
                    at,
                    TriggerEvent::OnSessionCheck { date },
                ))
            })?;
            print_record(&rec);
            Ok(())
        }
        Command::ReviewDue { state, date, at } => {
            let rec = dispatch(&state, |s, _| {
                Ok(date_trigger(
                    s,
                    date,
                    at,
                    TriggerEvent::OnReviewDue {
                        date,
                        observation: None,
                    },
                ))
            })?;
            print_record(&rec);
            let queue_date = rec.trigger.date();
            let sd = StateDir::new(&state);
            let st = sd.load_snapshot()?;
            let queue = build_review_queue(&st, queue_date, &sd.load_config()?.scheduler);
            println!(
                "{} due on {queue_date}, {} carried over",
                queue.items.len(),
                queue.carried
            );
            Ok(())
        }
        Command::Submit {
            state,
            item,
            passed,
            tests,
            time_ms,
            hints,
            errors,
            at,
        } => {
            let (tests_passed, tests_total) = parse_tests(&tests)?;
            let observation = Observation {
                item_id: item.as_str().into(),
                passed,
                timestamp: at.unwrap_or_else(Utc::now),
                hint_count: hints,
                error_tags: errors,
                solve_time: time_ms as f64 / 1000.0,
                tests_passed,
                tests_total,
                abandoned: false,
            };
            observation.check()?;
            let obs = observation.clone();
            let recs = dispatch_then(
                &state,
                |s, _| {
                    Ok(Trigger::new(
                        observation.timestamp,
                        trigger_seed(s),
                        TriggerEvent::OnSubmission { observation },
                    ))
                },
                |s, rec| {
                    if !matches!(rec.status, CommitStatus::Committed) {
                        return None;
                    }
                    let date = obs.timestamp.date_naive();
                    let due = s.review(&obs.item_id).is_none_or(|r| r.due_date <= date);
                    due.then(|| {
                        let at = obs.timestamp.max(s.updated_at()) + chrono::Duration::seconds(1);
                        Trigger::new(
                            at,
                            trigger_seed(s),
                            TriggerEvent::OnReviewDue {
                                date,
                                observation: Some(obs),
                            },
                        )
                    })
                },
            )?;
            for rec in &recs {
                print_record(rec);
            }
            Ok(())
        }
        Command::Hint { state, item, at } => {
            let rec = dispatch(&state, |s, records| {
                let item_id: ItemId = item.as_str().into();
                let hint_history = hints_since_pass(records, &item_id);
                Ok(Trigger::new(
                    at.unwrap_or_else(Utc::now),
                    trigger_seed(s),
                    TriggerEvent::OnHintRequest {
                        item_id,
                        hint_history,
                    },
                ))
            })?;
            print_record(&rec);
            Ok(())
        }
        Command::Simulate {
            personas,
            bank,
            days,
            seed,
            out,
            config,
        } => simulate(&personas, &bank, days, seed, &out, config.as_deref()),
        Command::Report { state, format } => report(&state, format),
        Command::Replay { state } => replay(&state),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
