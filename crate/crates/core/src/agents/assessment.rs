use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agents::{tier_for, AgentError};
use crate::curriculum::{HintTier, ProblemItem, SuggestionCategory};
use crate::observation::Observation;

/// A failing test case reported back to the learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailingTest {
    /// 1-based position in the item's test list.
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentResult {
    pub item_id: crate::ids::ItemId,
    pub passed: bool,
    pub tests_passed: u32,
    pub tests_total: u32,
    /// 1 (terse) to 3 (detailed), from the learner's proficiency tier.
    pub detail_level: u8,
    pub failing_tests: Vec<FailingTest>,
    /// Only populated for passing submissions.
    pub suggestions: BTreeMap<SuggestionCategory, Vec<String>>,
}

pub fn detail_level(tier: HintTier) -> u8 {
    match tier {
        HintTier::Beginner => 1,
        HintTier::Intermediate => 2,
        HintTier::Advanced => 3,
    }
}

/// Grades a submission. Failing runs list the tests that failed; passing
/// runs carry up to `detail_level` suggestions per category.
pub fn assess_submission(obs: &Observation, item: &ProblemItem, p_hat: f64) -> Result<AssessmentResult, AgentError> {
    obs.check().map_err(|e| AgentError::Malformed(e.to_string()))?;
    if obs.item_id != item.id {
        return Err(AgentError::Malformed(format!(
            "observation for `{}` assessed against `{}`",
            obs.item_id, item.id
        )));
    }
    let detail = detail_level(tier_for(p_hat));

    let failing_tests = if obs.passed {
        Vec::new()
    } else {
        (obs.tests_passed as usize..obs.tests_total as usize)
            .map(|i| {
                let case = item.tests.get(i);
                FailingTest {
                    index: i + 1,
                    input: case.map(|c| c.input.clone()),
                    expected: case.map(|c| c.expected.clone()),
                }
            })
            .collect()
    };
    let suggestions = if obs.passed {
        item.suggestions
            .iter()
            .filter(|(_, list)| !list.is_empty())
            .map(|(&cat, list)| (cat, list.iter().take(usize::from(detail)).cloned().collect()))
            .collect()
    } else {
        BTreeMap::new()
    };

    Ok(AssessmentResult {
        item_id: item.id.clone(),
        passed: obs.passed,
        tests_passed: obs.tests_passed,
        tests_total: obs.tests_total,
        detail_level: detail,
        failing_tests,
        suggestions,
    })
}

/// One-paragraph learner-facing summary of an assessment.
pub fn feedback_message(result: &AssessmentResult) -> String {
    if result.passed {
        let n: usize = result.suggestions.values().map(Vec::len).sum();
        if n == 0 {
            format!("All {} tests pass.", result.tests_total)
        } else {
            format!("All {} tests pass. {n} suggestion(s) for polishing the solution.", result.tests_total)
        }
    } else {
        let mut msg = format!("{}/{} tests pass.", result.tests_passed, result.tests_total);
        if let Some(first) = result.failing_tests.first() {
            msg.push_str(&format!(" Test {} fails", first.index));
            if result.detail_level >= 2 {
                if let Some(input) = &first.input {
                    msg.push_str(&format!(" on input {input}"));
                }
            }
            msg.push('.');
        }
        msg
    }
}
