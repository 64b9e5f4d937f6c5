use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curriculum::{discloses, HintTier, ProblemItem, DISCLOSURE_MIN_LEN};
use crate::ids::ItemId;

pub const MAX_HINT_LEVEL: u8 = 5;

/// Names of the five scaffold levels, from most general to most specific.
pub const HINT_LEVEL_NAMES: [&str; 5] = ["metacognitive", "conceptual", "strategic", "structural", "targeted"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hint {
    pub item_id: ItemId,
    /// Level actually served, `1..=5`.
    pub level: u8,
    /// Level the escalation policy asked for.
    pub requested_level: u8,
    pub tier: HintTier,
    pub text: String,
}

impl Hint {
    pub fn level_name(&self) -> &'static str {
        HINT_LEVEL_NAMES[usize::from(self.level.clamp(1, MAX_HINT_LEVEL) - 1)]
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum HintError {
    #[error("item `{0}` has no usable hint template at or below level {1}")]
    Unavailable(ItemId, u8),
    #[error("every candidate hint for `{0}` would disclose the reference solution")]
    Disclosure(ItemId),
}

/// Phrasing tier from proficiency: below 0.3 beginner, above 0.7 advanced.
pub fn tier_for(p_hat: f64) -> HintTier {
    if p_hat < 0.3 {
        HintTier::Beginner
    } else if p_hat <= 0.7 {
        HintTier::Intermediate
    } else {
        HintTier::Advanced
    }
}

/// Next level after `hint_history` hints on the current attempt.
pub fn hint_level(hint_history: u32) -> u8 {
    (1 + hint_history).min(u32::from(MAX_HINT_LEVEL)) as u8
}

fn render(template: &str, item: &ProblemItem) -> String {
    template.replace("{title}", &item.title)
}

/// Picks the template for the escalated level and the learner's tier. A
/// missing template falls back to the nearest lower level (other tiers last);
/// candidates that overlap the reference solution are skipped.
pub fn generate_hint(item: &ProblemItem, hint_history: u32, p_hat: f64) -> Result<Hint, HintError> {
    let requested = hint_level(hint_history);
    let tier = tier_for(p_hat);
    let mut any_candidate = false;

    let mut order: Vec<(u8, HintTier)> = (1..=requested).rev().map(|l| (l, tier)).collect();
    for level in (1..=requested).rev() {
        order.extend(HintTier::ALL.iter().filter(|&&t| t != tier).map(|&t| (level, t)));
    }
    for (level, t) in order {
        let Some(template) = item.hint_templates.get(&level).and_then(|m| m.get(&t)) else {
            continue;
        };
        any_candidate = true;
        let text = render(template, item);
        if discloses(&text, &item.reference_solution, DISCLOSURE_MIN_LEN) {
            continue;
        }
        return Ok(Hint {
            item_id: item.id.clone(),
            level,
            requested_level: requested,
            tier: t,
            text,
        });
    }
    if any_candidate {
        Err(HintError::Disclosure(item.id.clone()))
    } else {
        Err(HintError::Unavailable(item.id.clone(), requested))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curriculum::Difficulty;

    fn item() -> ProblemItem {
        let mut it = ProblemItem::minimal("fact", &["recursion"], Difficulty::Easy);
        it.title = "Factorial".into();
        it.reference_solution = "def fact(n): return 1 if n == 0 else n * fact(n - 1)".into();
        for level in [1u8, 2, 3, 5] {
            for tier in HintTier::ALL {
                it.hint_templates
                    .entry(level)
                    .or_default()
                    .insert(tier, format!("L{level} {tier:?} for {{title}}"));
            }
        }
        it
    }

    #[test]
    fn first_request_is_metacognitive() {
        let h = generate_hint(&item(), 0, 0.5).unwrap();
        assert_eq!((h.level, h.tier), (1, HintTier::Intermediate));
        assert_eq!(h.level_name(), "metacognitive");
        assert_eq!(h.text, "L1 Intermediate for Factorial");
    }

    #[test]
    fn escalation_saturates_at_five() {
        assert_eq!(generate_hint(&item(), 4, 0.2).unwrap().level, 5);
        assert_eq!(generate_hint(&item(), 9, 0.2).unwrap().level, 5);
    }

    #[test]
    fn missing_level_falls_back_lower() {
        let h = generate_hint(&item(), 3, 0.9).unwrap();
        assert_eq!((h.requested_level, h.level, h.tier), (4, 3, HintTier::Advanced));
    }

    #[test]
    fn leaky_template_is_skipped() {
        let mut it = item();
        it.hint_templates
            .get_mut(&2)
            .unwrap()
            .insert(HintTier::Beginner, "try return 1 if n == 0 else".into());
        let h = generate_hint(&it, 1, 0.1).unwrap();
        assert!(!discloses(&h.text, &it.reference_solution, DISCLOSURE_MIN_LEN));
        assert_eq!((h.level, h.tier), (1, HintTier::Beginner));
    }

    #[test]
    fn tiers() {
        assert_eq!(tier_for(0.29), HintTier::Beginner);
        assert_eq!(tier_for(0.3), HintTier::Intermediate);
        assert_eq!(tier_for(0.7), HintTier::Intermediate);
        assert_eq!(tier_for(0.71), HintTier::Advanced);
    }
}
