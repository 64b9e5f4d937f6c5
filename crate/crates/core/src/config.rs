//! Engine-wide configuration. Every section and field has a default, so an
//! empty JSON object is a valid config.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::AgentsConfig;
use crate::curriculum::CurriculumConfig;
use crate::learner::{MasteryConfig, ProficiencyWeights};
use crate::scheduler::SchedulerConfig;
use crate::simulation::{RewardConfig, SimulationConfig};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub mastery: MasteryConfig,
    pub proficiency: ProficiencyWeights,
    pub scheduler: SchedulerConfig,
    pub curriculum: CurriculumConfig,
    pub reward: RewardConfig,
    pub agents: AgentsConfig,
    pub simulation: SimulationConfig,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid `{section}` section: {detail}")]
    Invalid { section: &'static str, detail: String },
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing config: {0}")]
    Parse(#[from] serde_json::Error),
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn invalid(section: &'static str) -> impl Fn(String) -> ConfigError {
            move |detail| ConfigError::Invalid { section, detail }
        }
        self.mastery.validate().map_err(|e| invalid("mastery")(e.to_string()))?;
        self.proficiency.validate().map_err(|e| invalid("proficiency")(e.to_string()))?;
        self.scheduler.validate().map_err(|e| invalid("scheduler")(e.to_string()))?;
        self.curriculum.validate().map_err(|e| invalid("curriculum")(e.to_string()))?;
        self.reward.validate().map_err(invalid("reward"))?;
        self.simulation.validate().map_err(invalid("simulation"))?;
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
