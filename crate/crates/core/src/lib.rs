//! Adaptive tutoring engine built around one versioned learner record.
//!
//! Agents never write to the learner state. They read a snapshot and return
//! [`orchestrator::Proposal`]s; the [`orchestrator::Orchestrator`] validates
//! them and commits the accepted deltas as a single atomic version bump,
//! recording an [`orchestrator::AuditRecord`] that can later be replayed
//! bit-for-bit.
//!
//! Module map:
//!
//! - [`learner`]: state schema, mastery initialization and updates, Beta
//!   uncertainty, proficiency composite.
//! - [`scheduler`]: SM-2 quality, ease, intervals, recall prediction and
//!   context-aware interval adjustment.
//! - [`curriculum`]: problem bank, zone classification, daily-set selection,
//!   coverage accounting.
//! - [`agents`]: the pluggable agent interface and its reference policies.
//! - [`orchestrator`]: routing, validation, commit, replay.
//! - [`simulation`]: parametric learner personas, trajectories and metrics.
//! - [`store`]: canonical snapshots, the JSONL event log, state directories.

pub mod agents;
pub mod config;
pub mod curriculum;
pub mod ids;
pub mod learner;
pub mod observation;
pub mod orchestrator;
pub mod scheduler;
pub mod simulation;
pub mod store;
pub mod time;

pub use config::EngineConfig;
pub use ids::{ItemId, TopicId};
pub use learner::LearnerState;
pub use observation::{ErrorTag, Observation};
