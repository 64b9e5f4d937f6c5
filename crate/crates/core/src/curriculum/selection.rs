//! Daily-set composition under the 40/50/10 review/growth/challenge policy.

use std::collections::{BTreeMap, HashSet};

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bank::{Bank, ProblemItem};
use crate::ids::{ItemId, TopicId};
use crate::learner::LearnerState;
use crate::scheduler::ReviewItem;
use crate::time::date_diff;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumConfig {
    pub ratio_review: f64,
    pub ratio_growth: f64,
    pub ratio_challenge: f64,
    pub growth_low: f64,
    pub growth_high: f64,
    /// Days an item stays ineligible after being selected.
    pub repetition_window_k: u32,
    pub prereq_mastery_min: f64,
    /// Fraction of the daily set any single topic may occupy.
    pub max_topic_share: f64,
    pub daily_set_size: usize,
    /// A topic unselected for this many days counts as starved.
    pub starvation_days: u32,
    /// Review slots per day that may go to items on starved topics.
    pub fairness_slots: usize,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            ratio_review: 0.4,
            ratio_growth: 0.5,
            ratio_challenge: 0.1,
            growth_low: 0.3,
            growth_high: 0.7,
            repetition_window_k: 7,
            prereq_mastery_min: 0.3,
            max_topic_share: 0.4,
            daily_set_size: 10,
            starvation_days: 7,
            fairness_slots: 1,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid curriculum config: {0}")]
pub struct CurriculumConfigError(pub &'static str);

impl CurriculumConfig {
    pub fn validate(&self) -> Result<(), CurriculumConfigError> {
        let ratios = [self.ratio_review, self.ratio_growth, self.ratio_challenge];
        if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(CurriculumConfigError("ratios must be non-negative and sum to 1"));
        }
        if !(0.0 <= self.growth_low && self.growth_low < self.growth_high && self.growth_high <= 1.0) {
            return Err(CurriculumConfigError("need 0 <= growth_low < growth_high <= 1"));
        }
        if !(self.max_topic_share > 0.0 && self.max_topic_share <= 1.0) {
            return Err(CurriculumConfigError("max_topic_share must lie in (0, 1]"));
        }
        if self.starvation_days == 0 {
            return Err(CurriculumConfigError("starvation_days must be at least 1"));
        }
        if self.daily_set_size == 0 {
            return Err(CurriculumConfigError("daily_set_size must be at least 1"));
        }
        Ok(())
    }

    pub fn zone(&self, m: f64) -> Zone {
        if m < self.growth_low {
            Zone::Challenge
        } else if m <= self.growth_high {
            Zone::Growth
        } else {
            Zone::Mastered
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    Challenge,
    Growth,
    Mastered,
}

/// Zone of a mastery value under the configured bands (bounds inclusive for growth).
pub fn classify_zone(m: f64, config: &CurriculumConfig) -> Zone {
    config.zone(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    Review,
    Growth,
    Challenge,
    /// Backfill from mastered-zone items once the three policy pools run dry.
    Maintenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignedItem {
    pub item_id: ItemId,
    pub slot: SlotKind,
}

/// A committed daily set, kept in the learner state for the repetition window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyAssignment {
    pub date: NaiveDate,
    pub items: Vec<AssignedItem>,
    #[serde(default)]
    pub shortfall: usize,
}

/// Target slot counts for one day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SlotTargets {
    pub review: usize,
    pub growth: usize,
    pub challenge: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySet {
    pub date: NaiveDate,
    pub targets: SlotTargets,
    pub items: Vec<AssignedItem>,
    /// Slots that could not be filled.
    pub shortfall: usize,
    /// Eligible candidates per policy pool before picking.
    #[serde(default)]
    pub pools: SlotTargets,
}

impl DailySet {
    pub fn count(&self, slot: SlotKind) -> usize {
        self.items.iter().filter(|a| a.slot == slot).count()
    }

    pub fn to_assignment(&self) -> DailyAssignment {
        DailyAssignment {
            date: self.date,
            items: self.items.clone(),
            shortfall: self.shortfall,
        }
    }
}

/// Largest-remainder apportionment of `n` seats over the three ratios.
/// Remainder ties go to growth, then review, then challenge.
pub fn apportion(n: usize, config: &CurriculumConfig) -> SlotTargets {
    const EPS: f64 = 1e-9;
    let quotas = [
        config.ratio_review * n as f64,
        config.ratio_growth * n as f64,
        config.ratio_challenge * n as f64,
    ];
    let mut seats: Vec<usize> = quotas.iter().map(|q| (q + EPS).floor() as usize).collect();
    let mut left = n.saturating_sub(seats.iter().sum());
    // priority order for ties: growth (1), review (0), challenge (2)
    let mut order = vec![1usize, 0, 2];
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - seats[a] as f64;
        let rb = quotas[b] - seats[b] as f64;
        if (ra - rb).abs() <= EPS {
            std::cmp::Ordering::Equal
        } else {
            rb.total_cmp(&ra)
        }
    });
    for idx in order.iter().cycle() {
        if left == 0 {
            break;
        }
        seats[*idx] += 1;
        left -= 1;
    }
    SlotTargets {
        review: seats[0],
        growth: seats[1],
        challenge: seats[2],
    }
}

/// Items not selected within the repetition window and whose prerequisites
/// are all at or above the configured mastery, in id order.
pub fn eligible_items<'b>(
    bank: &'b Bank,
    state: &LearnerState,
    history: &[DailyAssignment],
    today: NaiveDate,
    config: &CurriculumConfig,
) -> Vec<&'b ProblemItem> {
    let k = i64::from(config.repetition_window_k);
    let recent: HashSet<&ItemId> = history
        .iter()
        .filter(|a| {
            let age = date_diff(a.date, today);
            (0..k).contains(&age)
        })
        .flat_map(|a| a.items.iter().map(|i| &i.item_id))
        .collect();
    bank.items()
        .iter()
        .filter(|item| !recent.contains(&item.id))
        .filter(|item| {
            item.prerequisites
                .iter()
                .all(|t| state.m(t) >= config.prereq_mastery_min)
        })
        .collect()
}

/// Topic-level reviews for topics not selected in the last
/// `starvation_days`, longest-starved first. Only considered once the
/// assignment history spans that long.
fn starvation_relief<'b>(
    bank: &'b Bank,
    state: &LearnerState,
    eligible: &[&'b ProblemItem],
    exclude: &HashSet<&ItemId>,
    today: NaiveDate,
    config: &CurriculumConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<&'b ProblemItem> {
    let history = state.assignments();
    let horizon = i64::from(config.starvation_days);
    let spans = history.iter().any(|a| date_diff(a.date, today) >= horizon);
    if config.fairness_slots == 0 || !spans {
        return Vec::new();
    }
    let mut last_seen: BTreeMap<&TopicId, NaiveDate> = BTreeMap::new();
    for a in history.iter().filter(|a| a.date < today) {
        for item in a.items.iter().filter_map(|i| bank.get(&i.item_id)) {
            for t in &item.topics {
                let e = last_seen.entry(t).or_insert(a.date);
                *e = (*e).max(a.date);
            }
        }
    }
    let starved_since = |t: &TopicId| last_seen.get(t).map_or(i64::MAX, |d| date_diff(*d, today));
    let mut out: Vec<&ProblemItem> = eligible
        .iter()
        .copied()
        .filter(|i| !exclude.contains(&i.id) && starved_since(i.primary_topic()) >= horizon)
        .collect();
    out.shuffle(rng);
    out.sort_by(|a, b| {
        starved_since(b.primary_topic())
            .cmp(&starved_since(a.primary_topic()))
            .then(state.m(a.primary_topic()).total_cmp(&state.m(b.primary_topic())))
    });
    let mut topics = HashSet::new();
    out.retain(|i| topics.insert(i.primary_topic()));
    out.truncate(config.fairness_slots);
    out
}

struct Picker<'a> {
    cap: usize,
    topic_counts: BTreeMap<&'a TopicId, usize>,
    used: HashSet<&'a ItemId>,
    picked: Vec<AssignedItem>,
}

impl<'a> Picker<'a> {
    fn fits(&self, item: &ProblemItem) -> bool {
        item.topics
            .iter()
            .all(|t| self.topic_counts.get(t).copied().unwrap_or(0) < self.cap)
    }

    fn count(&self, slot: SlotKind) -> usize {
        self.picked.iter().filter(|a| a.slot == slot).count()
    }

    fn take(&mut self, pool: &[&'a ProblemItem], slot: SlotKind, want: usize, respect_cap: bool) -> usize {
        let mut taken = 0;
        for &item in pool {
            if taken == want {
                break;
            }
            if self.used.contains(&item.id) || (respect_cap && !self.fits(item)) {
                continue;
            }
            self.used.insert(&item.id);
            for t in &item.topics {
                *self.topic_counts.entry(t).or_default() += 1;
            }
            self.picked.push(AssignedItem {
                item_id: item.id.clone(),
                slot,
            });
            taken += 1;
        }
        taken
    }
}

/// Builds the day's problem set: apportioned review/growth/challenge slots,
/// deficits backfilled growth → review → challenge (then mastered-zone
/// items), per-topic share capped where alternatives exist. A slot that the
/// cap left short is first topped up from its own pool. Up to
/// `fairness_slots` review slots go to topics starved of selection.
pub fn select_daily_set(
    state: &LearnerState,
    bank: &Bank,
    due_reviews: &[ReviewItem],
    today: NaiveDate,
    config: &CurriculumConfig,
    seed: u64,
) -> DailySet {
    let n = config.daily_set_size.max(1);
    let targets = apportion(n, config);
    let eligible = eligible_items(bank, state, state.assignments(), today, config);
    let eligible_ids: HashSet<&ItemId> = eligible.iter().map(|i| &i.id).collect();

    let review_pool: Vec<&ProblemItem> = due_reviews
        .iter()
        .filter(|r| eligible_ids.contains(&r.item_id))
        .filter_map(|r| bank.get(&r.item_id))
        .collect();
    let mut in_review: HashSet<&ItemId> = review_pool.iter().map(|i| &i.id).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let relief = starvation_relief(bank, state, &eligible, &in_review, today, config, &mut rng);
    in_review.extend(relief.iter().map(|i| &i.id));
    let review_pool: Vec<&ProblemItem> = relief.into_iter().chain(review_pool).collect();
    let mut pool_for = |zone: Zone| {
        let mut pool: Vec<&ProblemItem> = eligible
            .iter()
            .copied()
            .filter(|i| !in_review.contains(&i.id) && config.zone(state.m(i.primary_topic())) == zone)
            .collect();
        pool.shuffle(&mut rng);
        pool.sort_by(|a, b| state.m(a.primary_topic()).total_cmp(&state.m(b.primary_topic())));
        pool
    };
    let growth_pool = pool_for(Zone::Growth);
    let challenge_pool = pool_for(Zone::Challenge);
    let mastered_pool = pool_for(Zone::Mastered);

    let cap = ((config.max_topic_share * n as f64 + 1e-9).floor() as usize).max(1);
    let mut picker = Picker {
        cap,
        topic_counts: BTreeMap::new(),
        used: HashSet::new(),
        picked: Vec::with_capacity(n),
    };

    picker.take(&review_pool, SlotKind::Review, targets.review, true);
    picker.take(&growth_pool, SlotKind::Growth, targets.growth, true);
    picker.take(&challenge_pool, SlotKind::Challenge, targets.challenge, true);
    // Slot composition wins over the topic cap while a slot's own pool still has items.
    picker.take(&review_pool, SlotKind::Review, targets.review - picker.count(SlotKind::Review), false);
    picker.take(&growth_pool, SlotKind::Growth, targets.growth - picker.count(SlotKind::Growth), false);
    picker.take(&challenge_pool, SlotKind::Challenge, targets.challenge - picker.count(SlotKind::Challenge), false);

    let backfill = [
        (&growth_pool, SlotKind::Growth),
        (&review_pool, SlotKind::Review),
        (&challenge_pool, SlotKind::Challenge),
        (&mastered_pool, SlotKind::Maintenance),
    ];
    for respect_cap in [true, false] {
        for (pool, slot) in backfill {
            let want = n - picker.picked.len();
            if want == 0 {
                break;
            }
            picker.take(pool, slot, want, respect_cap);
        }
    }

    let mut items = picker.picked;
    items.sort_by_key(|a| a.slot);
    DailySet {
        date: today,
        targets,
        shortfall: n - items.len(),
        items,
        pools: SlotTargets {
            review: review_pool.len(),
            growth: growth_pool.len(),
            challenge: challenge_pool.len(),
        },
    }
}
