use std::collections::{BTreeMap, BTreeSet};

use crate::curriculum::Bank;
use crate::learner::{LearnerState, MemorySection};
use crate::orchestrator::commit::{stage, ApplyError};
use crate::orchestrator::{Action, AgentId, EngagementChange, MemoryAppend, Proposal, RejectReason, StateDelta};
use crate::scheduler::EASE_FLOOR;

fn unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

impl From<ApplyError> for RejectReason {
    fn from(e: ApplyError) -> Self {
        match e {
            ApplyError::Bounds { topic, value } => RejectReason::Bounds { topic, value },
            ApplyError::UnknownTopic(t) => RejectReason::UnknownTarget {
                target: format!("topic:{t}"),
            },
            ApplyError::Invalid(detail) => RejectReason::Schema { detail },
        }
    }
}

/// Checks a proposal against the state it would be applied to: routing,
/// schema and targets first, then a dry run of the deltas for bounds.
pub fn validate(
    proposal: &Proposal,
    state: &LearnerState,
    pipeline: &[AgentId],
    bank: &Bank,
) -> Result<(), Vec<RejectReason>> {
    let mut reasons = Vec::new();
    if !pipeline.contains(&proposal.agent_id) {
        reasons.push(RejectReason::NotRouted {
            agent: proposal.agent_id,
        });
    }

    let cap = state.memory().cap_per_section;
    let mut notes: BTreeMap<&'static str, usize> = BTreeMap::new();
    for delta in &proposal.deltas {
        match delta {
            StateDelta::Mastery(d) => {
                if state.topic(&d.topic).is_none() {
                    reasons.push(RejectReason::UnknownTarget {
                        target: format!("topic:{}", d.topic),
                    });
                } else if !unit(d.before) || !unit(d.after) {
                    reasons.push(RejectReason::Bounds {
                        topic: d.topic.clone(),
                        value: if unit(d.before) { d.after } else { d.before },
                    });
                }
            }
            StateDelta::ReviewUpsert(r) => match bank.get(&r.item_id) {
                None => reasons.push(RejectReason::UnknownTarget {
                    target: format!("item:{}", r.item_id),
                }),
                Some(item) => {
                    if !(r.ease_factor >= EASE_FLOOR && r.ease_factor.is_finite()) {
                        reasons.push(RejectReason::Schema {
                            detail: format!("ease factor {} for `{}`", r.ease_factor, r.item_id),
                        });
                    }
                    if r.interval_days == 0 {
                        reasons.push(RejectReason::Schema {
                            detail: format!("zero interval for `{}`", r.item_id),
                        });
                    }
                    if r.topics.is_empty() || r.topics.iter().any(|t| !item.topics.contains(t)) {
                        reasons.push(RejectReason::Schema {
                            detail: format!("review topics of `{}` differ from the bank", r.item_id),
                        });
                    }
                }
            },
            StateDelta::Engagement(EngagementChange::RecordActivity { attempts, passes, .. }) => {
                if passes > attempts {
                    reasons.push(RejectReason::Schema {
                        detail: format!("{passes} passes out of {attempts} attempts"),
                    });
                }
            }
            StateDelta::Engagement(EngagementChange::RecordIntervention { intervention }) => {
                if let Some(id) = intervention.suggested_item.as_ref().filter(|id| !bank.contains(id)) {
                    reasons.push(RejectReason::UnknownTarget {
                        target: format!("item:{id}"),
                    });
                }
            }
            StateDelta::Engagement(_) => {}
            StateDelta::Memory(MemoryAppend::Note { section, text }) => {
                let name = match section {
                    MemorySection::Trends => "trends",
                    MemorySection::Insights => "insights",
                };
                let n = notes.entry(name).or_default();
                *n += 1;
                if *n == cap + 1 {
                    reasons.push(RejectReason::CapExceeded {
                        section: name.to_owned(),
                        cap,
                    });
                }
                if text.trim().is_empty() {
                    reasons.push(RejectReason::Schema {
                        detail: "empty memory note".into(),
                    });
                }
            }
            StateDelta::Memory(MemoryAppend::Misconception { .. }) => {}
            StateDelta::Assignment(a) => {
                let mut seen = BTreeSet::new();
                for entry in &a.items {
                    if !bank.contains(&entry.item_id) {
                        reasons.push(RejectReason::UnknownTarget {
                            target: format!("item:{}", entry.item_id),
                        });
                    }
                    if !seen.insert(&entry.item_id) {
                        reasons.push(RejectReason::Schema {
                            detail: format!("`{}` assigned twice", entry.item_id),
                        });
                    }
                }
            }
        }
    }

    for action in &proposal.actions {
        match action {
            Action::Hint { hint } if !(1..=5).contains(&hint.level) => reasons.push(RejectReason::Schema {
                detail: format!("hint level {}", hint.level),
            }),
            Action::Feedback { detail, .. } if !(1..=3).contains(detail) => reasons.push(RejectReason::Schema {
                detail: format!("feedback detail {detail}"),
            }),
            _ => {}
        }
    }

    if reasons.is_empty() {
        if let Err(e) = stage(state, &proposal.deltas) {
            reasons.push(e.into());
        }
    }
    if reasons.is_empty() {
        Ok(())
    } else {
        Err(reasons)
    }
}
