use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mentorgraph::curriculum::Bank;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mentorgraph"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

struct Fixture {
    _tmp: tempfile::TempDir,
    root: PathBuf,
    state: String,
}

impl Fixture {
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().to_path_buf();
        fs::write(root.join("bank.json"), Bank::default_bank_json()).unwrap();
        let profile = serde_json::json!({
            "learner_id": "ada",
            "created_at": "2026-03-01T12:00:00Z",
            "history": [
                {"topics": ["arrays"], "item_id": "arrays-1", "passed": true, "timestamp": "2026-02-27T10:00:00Z",
                 "hint_count": 0, "solve_time": 200.0, "tests_passed": 3, "tests_total": 3},
                {"topics": ["recursion"], "item_id": "recursion-1", "passed": false, "timestamp": "2026-02-27T11:00:00Z",
                 "hint_count": 1, "solve_time": 700.0, "tests_passed": 1, "tests_total": 3, "error_tags": ["missing-base-case"]}
            ]
        });
        fs::write(root.join("profile.json"), profile.to_string()).unwrap();
        let state = root.join("state").display().to_string();
        let f = Self {
            _tmp: tmp,
            root,
            state,
        };
        ok(&[
            "init",
            "--profile",
            &f.path("profile.json"),
            "--bank",
            &f.path("bank.json"),
            "--state",
            &f.state,
            "--seed",
            "7",
        ]);
        f
    }

    fn path(&self, name: &str) -> String {
        self.root.join(name).display().to_string()
    }

    fn report(&self) -> Value {
        serde_json::from_str(&ok(&["report", "--state", &self.state])).unwrap()
    }
}

fn first_item(daily: &str) -> String {
    daily
        .lines()
        .find(|l| l.starts_with("  "))
        .and_then(|l| l.split_whitespace().nth(1))
        .expect("daily set lists items")
        .to_owned()
}

#[test]
fn full_workflow_keeps_a_consistent_log() {
    let f = Fixture::new();
    let s = f.state.as_str();
    ok(&["session-check", "--state", s, "--date", "2026-03-02"]);
    let daily = ok(&["daily", "--state", s, "--date", "2026-03-02"]);
    assert!(daily.contains("daily set 2026-03-02 (10 items"), "{daily}");
    let item = first_item(&daily);

    let bank = Bank::default_bank();
    let total = bank.get(&item.as_str().into()).unwrap().tests.len();
    let failing = format!("{}/{total}", total - 1);
    let passing = format!("{total}/{total}");
    ok(&[
        "submit",
        "--state",
        s,
        "--item",
        &item,
        "--passed",
        "false",
        "--tests",
        &failing,
        "--time-ms",
        "400000",
        "--errors",
        "off-by-one",
        "--at",
        "2026-03-02T09:10:00Z",
    ]);
    let h1 = ok(&[
        "hint",
        "--state",
        s,
        "--item",
        &item,
        "--at",
        "2026-03-02T09:11:00Z",
    ]);
    let h2 = ok(&[
        "hint",
        "--state",
        s,
        "--item",
        &item,
        "--at",
        "2026-03-02T09:12:00Z",
    ]);
    assert!(h1.contains("hint level"), "{h1}");
    let level = |out: &str| -> u32 {
        out.lines()
            .find_map(|l| l.strip_prefix("hint level "))
            .and_then(|l| l.split_whitespace().next())
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(
        level(&h2) >= level(&h1),
        "hints escalate from the log history"
    );
    ok(&[
        "submit",
        "--state",
        s,
        "--item",
        &item,
        "--passed",
        "true",
        "--tests",
        &passing,
        "--time-ms",
        "500000",
        "--hints",
        "2",
        "--at",
        "2026-03-02T09:30:00Z",
    ]);
    ok(&["review-due", "--state", s, "--date", "2026-03-03"]);

    let report = f.report();
    assert_eq!(report["learner_id"], "ada");
    assert_eq!(report["version"], 8);
    assert_eq!(report["audit"]["events"], 8);
    assert_eq!(report["audit"]["by_kind"]["on_hint_request"], 2);
    // One from grading the first submission, one from the review-due command; the retry is not yet due.
    assert_eq!(report["audit"]["by_kind"]["on_review_due"], 2);
    assert!(report["mastery"]["arrays"].as_f64().unwrap() > 0.0);

    let csv = ok(&["report", "--state", s, "--format", "csv"]);
    assert!(csv.starts_with("section,key,value\n"));
    assert!(csv.contains("learner,version,8"));

    let replay = ok(&["replay", "--state", s]);
    assert!(replay.contains("consistent: 8 events"), "{replay}");
}

#[test]
fn replay_fails_on_tampered_log() {
    let f = Fixture::new();
    ok(&["daily", "--state", &f.state, "--date", "2026-03-02"]);
    ok(&["session-check", "--state", &f.state, "--date", "2026-03-03"]);
    let log = Path::new(&f.state).join("events.jsonl");
    let text = fs::read_to_string(&log).unwrap();
    let (head, last) = text.trim_end().rsplit_once('\n').unwrap();
    fs::write(
        &log,
        format!("{head}\n{}\n", last.replace("2026-03-03", "2026-03-09")),
    )
    .unwrap();
    let out = run(&["replay", "--state", &f.state]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("version 2"));
}

#[test]
fn rejects_bad_input_without_touching_state() {
    let f = Fixture::new();
    let before = f.report();
    let out = run(&[
        "submit",
        "--state",
        &f.state,
        "--item",
        "arrays-1",
        "--passed",
        "true",
        "--tests",
        "1/3",
        "--time-ms",
        "1000",
    ]);
    assert!(!out.status.success());
    let out = run(&[
        "init",
        "--profile",
        &f.path("profile.json"),
        "--bank",
        &f.path("bank.json"),
        "--state",
        &f.state,
    ]);
    assert!(!out.status.success(), "init refuses an existing directory");
    assert_eq!(f.report(), before);
}

#[test]
fn simulate_writes_reports() {
    let f = Fixture::new();
    let personas: Vec<Value> =
        serde_json::from_str(include_str!("../../core/data/default_personas.json")).unwrap();
    fs::write(
        f.root.join("personas.json"),
        serde_json::to_string(&personas[..2]).unwrap(),
    )
    .unwrap();
    let out_dir = f.path("out");
    let stdout = ok(&[
        "simulate",
        "--personas",
        &f.path("personas.json"),
        "--bank",
        &f.path("bank.json"),
        "--days",
        "3",
        "--seed",
        "11",
        "--out",
        &out_dir,
    ]);
    assert!(stdout.contains("2 personas x 3 days"), "{stdout}");
    for name in [
        "metrics.json",
        "metrics.csv",
        "fig4_gains_by_level.csv",
        "fig5_hint_effectiveness.csv",
        "fig6_topic_distribution.csv",
    ] {
        assert!(Path::new(&out_dir).join(name).exists(), "{name}");
    }
    // latency columns are wall-clock; the gains and hint tables are not
    let read = || {
        ["fig4_gains_by_level.csv", "fig5_hint_effectiveness.csv"]
            .map(|n| fs::read_to_string(Path::new(&out_dir).join(n)).unwrap())
    };
    let first = read();
    ok(&[
        "simulate",
        "--personas",
        &f.path("personas.json"),
        "--bank",
        &f.path("bank.json"),
        "--days",
        "3",
        "--seed",
        "11",
        "--out",
        &out_dir,
    ]);
    assert_eq!(first, read(), "same seed, same metrics");
}
