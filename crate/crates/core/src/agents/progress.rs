use chrono::NaiveDate;

use crate::curriculum::ProblemItem;
use crate::learner::{LearnerState, DEFAULT_SOLVE_TIME_SECS};
use crate::observation::Observation;
use crate::scheduler::{adjust_interval, derive_quality, next_interval, update_ease, Quality, ReviewItem, SchedulerConfig};
use crate::time::add_days;

/// The rescheduled review record and the quality grade behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleUpdate {
    pub item: ReviewItem,
    pub quality: Quality,
}

/// SM-2 step for one review attempt: grade, ease update, base interval,
/// hint/speed adjustment and recall-floor preponement.
pub fn schedule_review(
    state: &LearnerState,
    obs: &Observation,
    item: &ProblemItem,
    today: NaiveDate,
    config: &SchedulerConfig,
) -> ScheduleUpdate {
    let current = state
        .review(&item.id)
        .cloned()
        .unwrap_or_else(|| ReviewItem::fresh(item.id.clone(), item.topics.clone(), today));
    let expected = item.expected_solve_time.unwrap_or(DEFAULT_SOLVE_TIME_SECS);
    let quality = derive_quality(obs, expected, config);
    let ease = update_ease(current.ease_factor, quality);
    let base = next_interval(current.n_reviews, current.interval_days, ease);
    let interval = adjust_interval(base, obs, expected, ease, config);
    ScheduleUpdate {
        item: ReviewItem {
            item_id: item.id.clone(),
            topics: item.topics.clone(),
            due_date: add_days(today, i64::from(interval)),
            interval_days: interval,
            ease_factor: ease,
            n_reviews: current.n_reviews + 1,
        },
        quality,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curriculum::Difficulty;
    use crate::learner::LearnerStateBuilder;
    use chrono::{TimeZone, Utc};

    fn obs(hints: u32, solve_time: f64) -> Observation {
        Observation {
            item_id: "a".into(),
            passed: true,
            timestamp: Utc.with_ymd_and_hms(2026, 4, 1, 10, 0, 0).unwrap(),
            hint_count: hints,
            error_tags: vec![],
            solve_time,
            tests_passed: 4,
            tests_total: 4,
            abandoned: false,
        }
    }

    fn today() -> NaiveDate {
        NaiveDate::from_ymd_opt(2026, 4, 1).unwrap()
    }

    fn item() -> ProblemItem {
        ProblemItem::minimal("a", &["x"], Difficulty::Medium).with_expected_time(600.0)
    }

    #[test]
    fn new_item_clean_fast_pass() {
        let s = LearnerStateBuilder::new("l", Utc.with_ymd_and_hms(2026, 3, 1, 0, 0, 0).unwrap()).build();
        let u = schedule_review(&s, &obs(0, 200.0), &item(), today(), &SchedulerConfig::default());
        assert_eq!(u.quality.value(), 5);
        assert_eq!(u.item.n_reviews, 1);
        assert_eq!(u.item.interval_days, 1);
        assert!((u.item.ease_factor - 2.6).abs() < 1e-12);
    }

    #[test]
    fn second_review_is_six_days_out() {
        let prior = ReviewItem {
            item_id: "a".into(),
            topics: vec!["x".into()],
            due_date: today(),
            interval_days: 1,
            ease_factor: 2.5,
            n_reviews: 1,
        };
        let s = LearnerStateBuilder::new("l", Utc.with_ymd_and_hms(2026, 3, 1, 0, 0, 0).unwrap())
            .review(prior)
            .build();
        let u = schedule_review(&s, &obs(0, 550.0), &item(), today(), &SchedulerConfig::default());
        assert_eq!(u.quality.value(), 4);
        assert_eq!(u.item.interval_days, 6);
        assert_eq!(u.item.due_date, NaiveDate::from_ymd_opt(2026, 4, 7).unwrap());
    }

    #[test]
    fn hinted_review_is_shortened() {
        let prior = ReviewItem {
            item_id: "a".into(),
            topics: vec!["x".into()],
            due_date: today(),
            interval_days: 6,
            ease_factor: 2.5,
            n_reviews: 2,
        };
        let s = LearnerStateBuilder::new("l", Utc.with_ymd_and_hms(2026, 3, 1, 0, 0, 0).unwrap())
            .review(prior)
            .build();
        let u = schedule_review(&s, &obs(3, 550.0), &item(), today(), &SchedulerConfig::default());
        assert_eq!(u.quality.value(), 3);
        // EF 2.36, base round(6 * 2.36) = 14, shortened to ceil(0.7 * 14).
        assert_eq!(u.item.interval_days, 10);
    }
}
