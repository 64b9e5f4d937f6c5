//! Problem bank records and their load-time validation.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{ItemId, TopicId};

/// Minimum length of a shared substring that counts as disclosing the solution.
pub const DISCLOSURE_MIN_LEN: usize = 12;

const DEFAULT_BANK_JSON: &str = include_str!("../../data/default_bank.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }
}

/// Phrasing tier of a hint, chosen from the learner's proficiency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HintTier {
    Beginner,
    Intermediate,
    Advanced,
}

impl HintTier {
    pub const ALL: [HintTier; 3] = [HintTier::Beginner, HintTier::Intermediate, HintTier::Advanced];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionCategory {
    Time,
    Space,
    Readability,
    EdgeCase,
}

impl SuggestionCategory {
    pub const ALL: [SuggestionCategory; 4] = [
        SuggestionCategory::Time,
        SuggestionCategory::Space,
        SuggestionCategory::Readability,
        SuggestionCategory::EdgeCase,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub input: String,
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemItem {
    pub id: ItemId,
    #[serde(default)]
    pub title: String,
    /// First entry is the primary topic.
    pub topics: Vec<TopicId>,
    pub difficulty: Difficulty,
    #[serde(default)]
    pub prerequisites: BTreeSet<TopicId>,
    /// Seconds.
    #[serde(default)]
    pub expected_solve_time: Option<f64>,
    /// Never rendered to learners.
    #[serde(default)]
    pub reference_solution: String,
    /// level (1..=5) -> tier -> template text.
    #[serde(default)]
    pub hint_templates: BTreeMap<u8, BTreeMap<HintTier, String>>,
    #[serde(default)]
    pub tests: Vec<TestCase>,
    /// Static improvement suggestions surfaced after a passing submission.
    #[serde(default)]
    pub suggestions: BTreeMap<SuggestionCategory, Vec<String>>,
}

impl ProblemItem {
    /// Bare item with one trivial test; mostly for tests and examples.
    pub fn minimal(id: &str, topics: &[&str], difficulty: Difficulty) -> Self {
        Self {
            id: id.into(),
            title: id.to_owned(),
            topics: topics.iter().map(|&t| TopicId::from(t)).collect(),
            difficulty,
            prerequisites: BTreeSet::new(),
            expected_solve_time: None,
            reference_solution: String::new(),
            hint_templates: BTreeMap::new(),
            tests: vec![TestCase {
                input: "()".into(),
                expected: "()".into(),
            }],
            suggestions: BTreeMap::new(),
        }
    }

    pub fn with_expected_time(mut self, secs: f64) -> Self {
        self.expected_solve_time = Some(secs);
        self
    }

    pub fn with_prerequisites(mut self, prereqs: &[&str]) -> Self {
        self.prerequisites = prereqs.iter().map(|&t| TopicId::from(t)).collect();
        self
    }

    pub fn primary_topic(&self) -> &TopicId {
        &self.topics[0]
    }
}

#[derive(Debug, Error)]
pub enum BankError {
    #[error("duplicate item id `{0}`")]
    DuplicateId(ItemId),
    #[error("item `{0}` has no topics")]
    NoTopics(ItemId),
    #[error("item `{item}` lists prerequisite `{topic}` which no bank item covers")]
    UnknownPrerequisite { item: ItemId, topic: TopicId },
    #[error("item `{item}` has a hint template at invalid level {level}")]
    BadHintLevel { item: ItemId, level: u8 },
    #[error("hint template of `{item}` (level {level}, {tier:?}) discloses part of the reference solution")]
    Disclosure { item: ItemId, level: u8, tier: HintTier },
    #[error("item `{0}` has no tests")]
    NoTests(ItemId),
    #[error("item `{0}` repeats a topic tag")]
    RepeatedTopic(ItemId),
    #[error("reading bank: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing bank: {0}")]
    Parse(#[from] serde_json::Error),
}

/// True when `text` and `secret` share a substring of at least `min_len` characters.
pub fn discloses(text: &str, secret: &str, min_len: usize) -> bool {
    let secret: Vec<char> = secret.chars().collect();
    let text: Vec<char> = text.chars().collect();
    if min_len == 0 {
        return true;
    }
    if secret.len() < min_len || text.len() < min_len {
        return false;
    }
    let windows: HashSet<&[char]> = secret.windows(min_len).collect();
    text.windows(min_len).any(|w| windows.contains(w))
}

/// A validated, id-sorted collection of problems.
#[derive(Debug, Clone, PartialEq)]
pub struct Bank {
    items: Vec<ProblemItem>,
    index: HashMap<ItemId, usize>,
    topics: BTreeSet<TopicId>,
}

impl Bank {
    pub fn new(mut items: Vec<ProblemItem>) -> Result<Self, BankError> {
        items.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = HashMap::with_capacity(items.len());
        let mut topics = BTreeSet::new();
        for (i, item) in items.iter().enumerate() {
            if index.insert(item.id.clone(), i).is_some() {
                return Err(BankError::DuplicateId(item.id.clone()));
            }
            if item.topics.is_empty() {
                return Err(BankError::NoTopics(item.id.clone()));
            }
            let distinct: BTreeSet<_> = item.topics.iter().collect();
            if distinct.len() != item.topics.len() {
                return Err(BankError::RepeatedTopic(item.id.clone()));
            }
            if item.tests.is_empty() {
                return Err(BankError::NoTests(item.id.clone()));
            }
            topics.extend(item.topics.iter().cloned());
        }
        for item in &items {
            if let Some(topic) = item.prerequisites.iter().find(|t| !topics.contains(*t)) {
                return Err(BankError::UnknownPrerequisite {
                    item: item.id.clone(),
                    topic: topic.clone(),
                });
            }
            for (&level, tiers) in &item.hint_templates {
                if !(1..=5).contains(&level) {
                    return Err(BankError::BadHintLevel {
                        item: item.id.clone(),
                        level,
                    });
                }
                for (&tier, text) in tiers {
                    if discloses(text, &item.reference_solution, DISCLOSURE_MIN_LEN) {
                        return Err(BankError::Disclosure {
                            item: item.id.clone(),
                            level,
                            tier,
                        });
                    }
                }
            }
        }
        Ok(Self { items, index, topics })
    }

    pub fn from_json(json: &str) -> Result<Self, BankError> {
        Self::new(serde_json::from_str(json)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BankError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The shipped 20-topic bank.
    pub fn default_bank() -> Self {
        Self::from_json(DEFAULT_BANK_JSON).expect("shipped bank is valid")
    }

    pub fn default_bank_json() -> &'static str {
        DEFAULT_BANK_JSON
    }

    pub fn items(&self) -> &[ProblemItem] {
        &self.items
    }

    pub fn get(&self, id: &ItemId) -> Option<&ProblemItem> {
        self.index.get(id).map(|&i| &self.items[i])
    }

    pub fn contains(&self, id: &ItemId) -> bool {
        self.index.contains_key(id)
    }

    pub fn topics(&self) -> &BTreeSet<TopicId> {
        &self.topics
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.items).expect("bank serializes")
    }
}
