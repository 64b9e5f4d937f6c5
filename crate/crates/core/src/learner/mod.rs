//! Learner state schema: mastery map, review queue, engagement, preferences,
//! long-term memory and the version counter.
//!
//! [`LearnerState`] has no public mutators. Fresh states come from
//! [`LearnerStateBuilder`]; every later state is produced by the orchestrator's
//! commit path.

mod mastery;
mod proficiency;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::curriculum::DailyAssignment;
use crate::ids::{ItemId, TopicId};
use crate::observation::ErrorTag;
use crate::scheduler::ReviewItem;

pub use mastery::{
    apply_observation, init_mastery, uncertainty, DifficultyWeights, MasteryConfig, MasteryDelta,
    MasteryError, TaggedObservation, DEFAULT_SOLVE_TIME_SECS, RECENT_WINDOW,
};
pub use proficiency::{
    compute_proficiency, proficiency, recent_success_rate, streak_norm, ProficiencyError,
    ProficiencyWeights,
};

/// Trailing days kept in [`EngagementState::activity_window`].
pub const ACTIVITY_WINDOW_DAYS: usize = 30;

/// Per-topic mastery estimate plus Beta evidence counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicMastery {
    pub topic_id: TopicId,
    /// Mastery in `[0, 1]`.
    pub m: f64,
    pub alpha_count: f64,
    pub beta_count: f64,
    pub last_update: DateTime<Utc>,
    /// Most recent solve times on this topic, oldest first, at most [`RECENT_WINDOW`].
    #[serde(default)]
    pub recent_solve_times: Vec<f64>,
}

impl TopicMastery {
    /// Cold-start record: `m = 0` with the uninformative Beta(1, 1) prior.
    pub fn cold(topic_id: TopicId, at: DateTime<Utc>) -> Self {
        Self {
            topic_id,
            m: 0.0,
            alpha_count: 1.0,
            beta_count: 1.0,
            last_update: at,
            recent_solve_times: Vec::new(),
        }
    }
}

/// Attempts and passes on one calendar day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityDay {
    pub date: NaiveDate,
    pub attempts: u32,
    #[serde(default)]
    pub passes: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterventionKind {
    StreakNudge,
    Reengagement,
    SimplerVariant,
}

/// A supportive prompt issued by the engagement monitor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    pub kind: InterventionKind,
    pub message: String,
    pub issued_at: DateTime<Utc>,
    /// Easy item proposed by a `simpler_variant` intervention.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggested_item: Option<ItemId>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EngagementState {
    pub streak_days: u32,
    pub last_seen: Option<DateTime<Utc>>,
    pub failure_streak: u32,
    /// One entry per active day, oldest first, trailing [`ACTIVITY_WINDOW_DAYS`].
    pub activity_window: Vec<ActivityDay>,
    /// Interventions issued recently; used for the per-day rate limit.
    #[serde(default)]
    pub interventions: Vec<Intervention>,
}

impl EngagementState {
    pub fn attempts_on(&self, date: NaiveDate) -> u32 {
        self.activity_window
            .iter()
            .find(|d| d.date == date)
            .map_or(0, |d| d.attempts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    #[default]
    Text,
    Visual,
    Interactive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preferences {
    pub self_reported_skill: f64,
    pub expertise_rank: f64,
    /// Minutes per day.
    pub daily_time_budget: u32,
    #[serde(default)]
    pub modality: Modality,
    #[serde(default)]
    pub opt_outs: BTreeSet<InterventionKind>,
}

impl Default for Preferences {
    fn default() -> Self {
        Self {
            self_reported_skill: 0.0,
            expertise_rank: 0.0,
            daily_time_budget: 60,
            modality: Modality::Text,
            opt_outs: BTreeSet::new(),
        }
    }
}

impl Preferences {
    pub fn is_bounded(&self) -> bool {
        (0.0..=1.0).contains(&self.self_reported_skill) && (0.0..=1.0).contains(&self.expertise_rank)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Misconception {
    pub tag: ErrorTag,
    pub evidence_count: u32,
    pub last_seen: DateTime<Utc>,
    /// 1-based; ordered by evidence desc, ties by recency.
    pub rank: u32,
}

pub const DEFAULT_MEMORY_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorySections {
    pub trends: Vec<String>,
    pub misconceptions: Vec<Misconception>,
    pub insights: Vec<String>,
    pub cap_per_section: usize,
}

impl Default for MemorySections {
    fn default() -> Self {
        Self {
            trends: Vec::new(),
            misconceptions: Vec::new(),
            insights: Vec::new(),
            cap_per_section: DEFAULT_MEMORY_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemorySection {
    Trends,
    Insights,
}

/// The versioned single source of truth for one learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    pub(crate) learner_id: String,
    pub(crate) mastery: BTreeMap<TopicId, TopicMastery>,
    pub(crate) reviews: Vec<ReviewItem>,
    pub(crate) engagement: EngagementState,
    pub(crate) preferences: Preferences,
    pub(crate) memory: MemorySections,
    /// Daily sets issued in the trailing window, oldest first.
    #[serde(default)]
    pub(crate) assignments: Vec<DailyAssignment>,
    pub(crate) version: u64,
    pub(crate) updated_at: DateTime<Utc>,
}

impl LearnerState {
    pub fn learner_id(&self) -> &str {
        &self.learner_id
    }

    pub fn mastery(&self) -> &BTreeMap<TopicId, TopicMastery> {
        &self.mastery
    }

    pub fn topic(&self, topic: &TopicId) -> Option<&TopicMastery> {
        self.mastery.get(topic)
    }

    /// Mastery of `topic`, or `0` for a topic without a record.
    pub fn m(&self, topic: &TopicId) -> f64 {
        self.mastery.get(topic).map_or(0.0, |t| t.m)
    }

    pub fn mean_mastery(&self) -> f64 {
        if self.mastery.is_empty() {
            0.0
        } else {
            self.mastery.values().map(|t| t.m).sum::<f64>() / self.mastery.len() as f64
        }
    }

    /// Review queue sorted by item id.
    pub fn reviews(&self) -> &[ReviewItem] {
        &self.reviews
    }

    pub fn review(&self, item: &ItemId) -> Option<&ReviewItem> {
        self.reviews.iter().find(|r| &r.item_id == item)
    }

    pub fn engagement(&self) -> &EngagementState {
        &self.engagement
    }

    pub fn preferences(&self) -> &Preferences {
        &self.preferences
    }

    pub fn memory(&self) -> &MemorySections {
        &self.memory
    }

    pub fn assignments(&self) -> &[DailyAssignment] {
        &self.assignments
    }

    pub fn assignment_on(&self, date: NaiveDate) -> Option<&DailyAssignment> {
        self.assignments.iter().find(|a| a.date == date)
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn updated_at(&self) -> DateTime<Utc> {
        self.updated_at
    }
}

/// Assembles a version-0 learner state.
#[derive(Debug, Clone)]
pub struct LearnerStateBuilder {
    state: LearnerState,
}

impl LearnerStateBuilder {
    pub fn new(learner_id: impl Into<String>, created_at: DateTime<Utc>) -> Self {
        Self {
            state: LearnerState {
                learner_id: learner_id.into(),
                mastery: BTreeMap::new(),
                reviews: Vec::new(),
                engagement: EngagementState::default(),
                preferences: Preferences::default(),
                memory: MemorySections::default(),
                assignments: Vec::new(),
                version: 0,
                updated_at: created_at,
            },
        }
    }

    pub fn mastery(mut self, mastery: BTreeMap<TopicId, TopicMastery>) -> Self {
        self.state.mastery = mastery;
        self
    }

    /// Sets one topic's mastery, creating a cold record first when absent.
    pub fn topic_mastery(mut self, topic: impl Into<TopicId>, m: f64) -> Self {
        let topic = topic.into();
        let at = self.state.updated_at;
        self.state
            .mastery
            .entry(topic.clone())
            .or_insert_with(|| TopicMastery::cold(topic, at))
            .m = m;
        self
    }

    pub fn preferences(mut self, preferences: Preferences) -> Self {
        self.state.preferences = preferences;
        self
    }

    pub fn engagement(mut self, engagement: EngagementState) -> Self {
        self.state.engagement = engagement;
        self
    }

    pub fn memory_cap(mut self, cap: usize) -> Self {
        self.state.memory.cap_per_section = cap.max(1);
        self
    }

    pub fn review(mut self, item: ReviewItem) -> Self {
        self.state.reviews.retain(|r| r.item_id != item.item_id);
        self.state.reviews.push(item);
        self.state.reviews.sort_by(|a, b| a.item_id.cmp(&b.item_id));
        self
    }

    pub fn assignment(mut self, assignment: DailyAssignment) -> Self {
        self.state.assignments.push(assignment);
        self.state.assignments.sort_by_key(|a| a.date);
        self
    }

    pub fn build(self) -> LearnerState {
        self.state
    }
}
