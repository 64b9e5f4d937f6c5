use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::ids::{ItemId, TopicId};
use crate::time::date_diff;

/// One selected item with the topics it exercised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionLogEntry {
    pub date: NaiveDate,
    pub item_id: ItemId,
    pub topics: Vec<TopicId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub horizon_days: u32,
    /// Fraction of bank topics selected at least once.
    pub coverage: f64,
    /// Normalized entropy of topic-selection counts.
    pub diversity: f64,
    /// IQR of gains over their median; `None` when the median is not positive.
    pub fairness_iqr_ratio: Option<f64>,
    pub topic_counts: BTreeMap<TopicId, usize>,
}

/// Linear-interpolation quantile (the "type 7" estimator) of unsorted data.
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

/// `IQR / median`, `None` when the median is not positive or there are no gains.
pub fn iqr_ratio(gains: &[f64]) -> Option<f64> {
    let median = quantile(gains, 0.5)?;
    if median <= 0.0 {
        return None;
    }
    Some((quantile(gains, 0.75)? - quantile(gains, 0.25)?) / median)
}

/// Coverage, diversity and fairness over the last `horizon` days of the log.
pub fn coverage_report(
    selection_log: &[SelectionLogEntry],
    bank_topics: &BTreeSet<TopicId>,
    gains: &[f64],
    horizon: u32,
) -> CoverageReport {
    let horizon = horizon.max(1);
    let end = selection_log.iter().map(|e| e.date).max();
    let mut counts: BTreeMap<TopicId, usize> = BTreeMap::new();
    if let Some(end) = end {
        for entry in selection_log
            .iter()
            .filter(|e| date_diff(e.date, end) < i64::from(horizon))
        {
            for topic in entry.topics.iter().filter(|t| bank_topics.contains(*t)) {
                *counts.entry(topic.clone()).or_default() += 1;
            }
        }
    }

    let coverage = if bank_topics.is_empty() {
        0.0
    } else {
        counts.len() as f64 / bank_topics.len() as f64
    };
    let total: usize = counts.values().sum();
    let diversity = if bank_topics.len() <= 1 || total == 0 {
        0.0
    } else {
        let h: f64 = counts
            .values()
            .map(|&c| {
                let p = c as f64 / total as f64;
                -p * p.ln()
            })
            .sum();
        (h / (bank_topics.len() as f64).ln()).clamp(0.0, 1.0)
    };

    CoverageReport {
        horizon_days: horizon,
        coverage,
        diversity,
        fairness_iqr_ratio: iqr_ratio(gains),
        topic_counts: counts,
    }
}
