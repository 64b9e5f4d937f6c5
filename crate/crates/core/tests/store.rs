mod common;

use std::fs::{self, OpenOptions};
use std::io::Write;

use common::{t0, TriggerStream};
use mentorgraph::agents::DeterministicAgents;
use mentorgraph::curriculum::Bank;
use mentorgraph::learner::LearnerStateBuilder;
use mentorgraph::orchestrator::Orchestrator;
use mentorgraph::store::{
    parse_snapshot, read_events, reconstruct, recover, state_digest, write_snapshot, EventLog, EventRecord, StateDir,
    StoreError,
};
use mentorgraph::{EngineConfig, LearnerState};
use proptest::prelude::*;

fn learner(bank: &Bank) -> LearnerState {
    let mut b = LearnerStateBuilder::new("store", t0());
    for (i, t) in bank.topics().iter().enumerate() {
        b = b.topic_mastery(t.clone(), (i as f64 * 0.37) % 1.0);
    }
    b.build()
}

/// A learner directory with `n` recorded triggers.
fn populated(n: usize, seed: u64) -> (tempfile::TempDir, StateDir, Bank, EngineConfig) {
    let tmp = tempfile::tempdir().unwrap();
    let sd = StateDir::new(tmp.path().join("learner"));
    let bank = Bank::default_bank();
    let config = EngineConfig::default();
    sd.init(&learner(&bank), &config, &bank).unwrap();
    {
        let lock = sd.lock().unwrap();
        let (mut log, _) = sd.open_log().unwrap();
        let mut orch = Orchestrator::new(sd.load_snapshot().unwrap(), &bank, &config, DeterministicAgents).without_log();
        let mut stream = TriggerStream::new(&bank, seed);
        for _ in 0..n {
            let rec = orch.dispatch(stream.next_trigger());
            sd.record(&lock, &mut log, &rec, orch.state()).unwrap();
        }
    }
    (tmp, sd, bank, config)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn serialize_parse_serialize_is_identical(seed in any::<u64>(), n in 0usize..80) {
        let bank = Bank::default_bank();
        let config = EngineConfig::default();
        let mut orch = Orchestrator::new(learner(&bank), &bank, &config, DeterministicAgents).without_log();
        let mut stream = TriggerStream::new(&bank, seed);
        for _ in 0..n {
            orch.dispatch(stream.next_trigger());
        }
        let (bytes, digest) = write_snapshot(orch.state()).unwrap();
        let back = parse_snapshot(&bytes).unwrap();
        let (again, digest2) = write_snapshot(&back).unwrap();
        prop_assert_eq!(&bytes, &again);
        prop_assert_eq!(digest, digest2);
        prop_assert_eq!(&back, orch.state());
    }

    #[test]
    fn insertion_order_does_not_matter(ms in proptest::collection::vec(0.0..=1.0f64, 1..20)) {
        let mut fwd = LearnerStateBuilder::new("o", t0());
        let mut rev = LearnerStateBuilder::new("o", t0());
        for (i, m) in ms.iter().enumerate() {
            fwd = fwd.topic_mastery(format!("t{i:02}"), *m);
        }
        for (i, m) in ms.iter().enumerate().rev() {
            rev = rev.topic_mastery(format!("t{i:02}"), *m);
        }
        prop_assert_eq!(write_snapshot(&fwd.build()).unwrap(), write_snapshot(&rev.build()).unwrap());
    }
}

#[test]
fn non_finite_values_refuse_to_serialize() {
    let state = LearnerStateBuilder::new("nan", t0()).topic_mastery("t", f64::NAN).build();
    assert!(matches!(write_snapshot(&state), Err(StoreError::NonFinite(f)) if f == "mastery.t.m"));
}

#[test]
fn snapshot_plus_tail_of_log_reaches_the_final_state() {
    let (_tmp, sd, bank, config) = populated(120, 3);
    let events = sd.read_events().unwrap();
    assert_eq!(events.len(), 120);
    let full = reconstruct(sd.load_initial().unwrap(), &events, &bank, &config, DeterministicAgents).unwrap();
    let final_snapshot = sd.load_snapshot().unwrap();
    assert_eq!(state_digest(&full), state_digest(&final_snapshot));

    let midway = reconstruct(sd.load_initial().unwrap(), &events[..60], &bank, &config, DeterministicAgents).unwrap();
    assert_eq!(state_digest(&midway), events[59].state_digest);
    let rest = reconstruct(midway, &events[60..], &bank, &config, DeterministicAgents).unwrap();
    assert_eq!(state_digest(&rest), state_digest(&final_snapshot));

    let none = reconstruct(final_snapshot.clone(), &[], &bank, &config, DeterministicAgents).unwrap();
    assert_eq!(none, final_snapshot);
}

#[test]
fn garbage_line_names_its_version() {
    let (_tmp, sd, _, _) = populated(12, 4);
    let text = fs::read_to_string(sd.events_path()).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[6] = "{\"version\": 7, \"oops\"";
    fs::write(sd.events_path(), lines.join("\n") + "\n").unwrap();
    match sd.read_events() {
        Err(StoreError::CorruptLine { version, line, .. }) => assert_eq!((version, line), (7, 7)),
        other => panic!("expected a corrupt line, got {other:?}"),
    }
}

#[test]
fn edited_payload_diverges_at_its_version() {
    let (_tmp, sd, bank, config) = populated(12, 4);
    let text = fs::read_to_string(sd.events_path()).unwrap();
    let mut records: Vec<EventRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    records[6].payload.seed ^= 1;
    records[6].payload.timestamp += chrono::Duration::seconds(1);
    let err = reconstruct(sd.load_initial().unwrap(), &records, &bank, &config, DeterministicAgents).unwrap_err();
    assert!(err.to_string().contains("version 7"), "{err}");
}

#[test]
fn interrupted_write_is_recoverable() {
    let (_tmp, sd, _, _) = populated(5, 8);
    let mut f = OpenOptions::new().append(true).open(sd.events_path()).unwrap();
    f.write_all(b"{\"version\":6,\"times").unwrap();
    drop(f);
    let contents = read_events(&sd.events_path(), 0).unwrap();
    assert_eq!(contents.records.len(), 5);
    assert!(contents.truncated_tail.is_some());
    assert!(matches!(sd.open_log(), Err(StoreError::TruncatedTail { after_version: 5, .. })));
    assert_eq!(recover(&sd.events_path(), 0).unwrap(), "{\"version\":6,\"times".len());
    let (log, records) = sd.open_log().unwrap();
    assert_eq!((log.last_version(), records.len()), (5, 5));
}

#[test]
fn appends_must_be_consecutive() {
    let (_tmp, sd, _, _) = populated(3, 1);
    let (mut log, records) = sd.open_log().unwrap();
    let mut next = records[2].clone();
    next.version = 5;
    assert!(matches!(log.append(&next), Err(StoreError::VersionGap { expected: 4, found: 5 })));
}

#[test]
fn thousand_appends_stay_parseable() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("events.jsonl");
    let (_src, sd_src, _, _) = populated(1, 2);
    let template = sd_src.read_events().unwrap().remove(0);
    let (mut log, _) = EventLog::open(&path, 0).unwrap();
    for v in 1..=1000 {
        let mut r = template.clone();
        r.version = v;
        log.append(&r).unwrap();
    }
    let back = read_events(&path, 0).unwrap();
    assert_eq!(back.records.len(), 1000);
    assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 1000);
}

#[test]
fn second_writer_is_locked_out() {
    let (_tmp, sd, _, _) = populated(0, 0);
    let held = sd.lock().unwrap();
    assert!(matches!(sd.lock(), Err(StoreError::Locked(_))));
    drop(held);
    assert!(sd.lock().is_ok());
}

#[test]
fn sub_precision_perturbations_share_a_digest() {
    let digest = |m: f64| state_digest(&LearnerStateBuilder::new("d", t0()).topic_mastery("t", m).build());
    // 1 + 1e-16 rounds back to 1.0 in binary64; 0.5 + 1e-16 is the next float up.
    assert_eq!(1.0 + 1e-16, 1.0);
    assert_eq!(digest(1.0), digest(1.0 + 1e-16));
    assert_ne!(0.5 + 1e-16, 0.5);
    assert_ne!(digest(0.5), digest(0.5 + 1e-16));
}
