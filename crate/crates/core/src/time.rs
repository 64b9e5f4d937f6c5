//! Small calendar helpers shared by the scheduler, curator and simulator.

use chrono::{DateTime, NaiveDate, TimeZone, Utc};

const MS_PER_DAY: f64 = 86_400_000.0;

/// Fractional days from `from` to `to` (negative when `to` precedes `from`).
pub fn days_between(from: DateTime<Utc>, to: DateTime<Utc>) -> f64 {
    (to - from).num_milliseconds() as f64 / MS_PER_DAY
}

/// Whole calendar days from `from` to `to`.
pub fn date_diff(from: NaiveDate, to: NaiveDate) -> i64 {
    (to - from).num_days()
}

/// Midnight UTC at the start of `date`.
pub fn start_of_day(date: NaiveDate) -> DateTime<Utc> {
    Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).expect("midnight is valid"))
}

/// Shifts `date` by a signed number of days.
pub fn add_days(date: NaiveDate, days: i64) -> NaiveDate {
    date + chrono::Duration::days(days)
}
