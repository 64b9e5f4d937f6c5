//! Problem bank, zone classification and the content curator's selection policy.

mod bank;
mod coverage;
mod selection;

pub use bank::{
    discloses, Bank, BankError, Difficulty, HintTier, ProblemItem, SuggestionCategory, TestCase,
    DISCLOSURE_MIN_LEN,
};
pub use coverage::{coverage_report, iqr_ratio, quantile, CoverageReport, SelectionLogEntry};
pub use selection::{
    apportion, classify_zone, eligible_items, select_daily_set, AssignedItem, CurriculumConfig,
    CurriculumConfigError, DailyAssignment, DailySet, SlotKind, SlotTargets, Zone,
};
