//! The submission record and the closed error-tag vocabulary.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::ItemId;

/// One graded interaction with a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub item_id: ItemId,
    pub passed: bool,
    pub timestamp: DateTime<Utc>,
    pub hint_count: u32,
    #[serde(default)]
    pub error_tags: Vec<String>,
    /// Time on task, seconds.
    pub solve_time: f64,
    pub tests_passed: u32,
    pub tests_total: u32,
    /// Learner gave up or the attempt timed out.
    #[serde(default)]
    pub abandoned: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum ObservationError {
    #[error("tests_total must be positive")]
    NoTests,
    #[error("tests_passed ({passed}) exceeds tests_total ({total})")]
    TooManyPassed { passed: u32, total: u32 },
    #[error("passed flag disagrees with test counts {passed}/{total}")]
    VerdictMismatch { passed: u32, total: u32 },
    #[error("solve time must be a non-negative finite number of seconds, got {0}")]
    BadSolveTime(f64),
}

impl Observation {
    /// Checks the record-level invariants (test counts agree with the verdict,
    /// solve time is sane).
    pub fn check(&self) -> Result<(), ObservationError> {
        if self.tests_total == 0 {
            return Err(ObservationError::NoTests);
        }
        if self.tests_passed > self.tests_total {
            return Err(ObservationError::TooManyPassed {
                passed: self.tests_passed,
                total: self.tests_total,
            });
        }
        if self.passed != (self.tests_passed == self.tests_total) {
            return Err(ObservationError::VerdictMismatch {
                passed: self.tests_passed,
                total: self.tests_total,
            });
        }
        if !self.solve_time.is_finite() || self.solve_time < 0.0 {
            return Err(ObservationError::BadSolveTime(self.solve_time));
        }
        Ok(())
    }

    /// Error tags mapped onto the vocabulary; unknown strings become [`ErrorTag::Other`].
    pub fn mapped_tags(&self) -> Vec<ErrorTag> {
        self.error_tags.iter().map(|t| ErrorTag::classify(t)).collect()
    }
}

/// Misconception vocabulary shared by the profiler and the bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorTag {
    MissingBaseCase,
    OffByOne,
    WrongDataStructure,
    InfiniteLoop,
    NullHandling,
    IntegerOverflow,
    WrongComplexity,
    EmptyInput,
    BoundaryCondition,
    MutationAliasing,
    IncorrectRecurrence,
    TypeMismatch,
    /// Bucket for tags outside the vocabulary.
    Other,
}

impl ErrorTag {
    /// The twelve vocabulary tags, excluding the `other` bucket.
    pub const VOCABULARY: [ErrorTag; 12] = [
        ErrorTag::MissingBaseCase,
        ErrorTag::OffByOne,
        ErrorTag::WrongDataStructure,
        ErrorTag::InfiniteLoop,
        ErrorTag::NullHandling,
        ErrorTag::IntegerOverflow,
        ErrorTag::WrongComplexity,
        ErrorTag::EmptyInput,
        ErrorTag::BoundaryCondition,
        ErrorTag::MutationAliasing,
        ErrorTag::IncorrectRecurrence,
        ErrorTag::TypeMismatch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorTag::MissingBaseCase => "missing-base-case",
            ErrorTag::OffByOne => "off-by-one",
            ErrorTag::WrongDataStructure => "wrong-data-structure",
            ErrorTag::InfiniteLoop => "infinite-loop",
            ErrorTag::NullHandling => "null-handling",
            ErrorTag::IntegerOverflow => "integer-overflow",
            ErrorTag::WrongComplexity => "wrong-complexity",
            ErrorTag::EmptyInput => "empty-input",
            ErrorTag::BoundaryCondition => "boundary-condition",
            ErrorTag::MutationAliasing => "mutation-aliasing",
            ErrorTag::IncorrectRecurrence => "incorrect-recurrence",
            ErrorTag::TypeMismatch => "type-mismatch",
            ErrorTag::Other => "other",
        }
    }

    /// Maps a raw tag onto the vocabulary, falling back to `Other`.
    pub fn classify(raw: &str) -> ErrorTag {
        raw.parse().unwrap_or(ErrorTag::Other)
    }
}

impl fmt::Display for ErrorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
#[error("unknown error tag `{0}`")]
pub struct UnknownTag(pub String);

impl FromStr for ErrorTag {
    type Err = UnknownTag;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        ErrorTag::VOCABULARY
            .iter()
            .chain(std::iter::once(&ErrorTag::Other))
            .copied()
            .find(|t| t.as_str() == norm)
            .ok_or_else(|| UnknownTag(s.to_owned()))
    }
}
