//! Architecture template: compute-unit shape and memory-level scopes.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::units::{de_opt_f64, de_u64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataflow {
    WeightStationary,
    ActivationStationary,
    OutputStationary,
    Auto,
}

/// Which compute units share one instance of a memory level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Mcu,
    Bundle,
    Global,
}

fn auto() -> Dataflow {
    Dataflow::Auto
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McuTemplate {
    #[serde(deserialize_with = "de_u64")]
    pub array_x: u64,
    #[serde(deserialize_with = "de_u64")]
    pub array_y: u64,
    #[serde(default = "auto")]
    pub dataflow: Dataflow,
    /// Overrides the technology library's compute utilization cap.
    #[serde(
        default,
        deserialize_with = "de_opt_f64",
        skip_serializing_if = "Option::is_none"
    )]
    pub max_utilization: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemLevelTemplate {
    pub name: String,
    pub scope: Scope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchTemplate {
    pub mcu: McuTemplate,
    #[serde(default = "one", deserialize_with = "de_u64")]
    pub mcus_per_bundle: u64,
    /// Ordered from registers (`L0`) outward.
    pub mem_levels: Vec<MemLevelTemplate>,
}

impl ArchTemplate {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.mcu.array_x == 0 || self.mcu.array_y == 0 {
            return Err(ConfigError::Invalid {
                field: "arch_template.mcu".into(),
                reason: "array dims must be >= 1".into(),
            });
        }
        if let Some(u) = self.mcu.max_utilization {
            if !(u > 0.0 && u <= 1.0) {
                return Err(ConfigError::Invalid {
                    field: "arch_template.mcu.max_utilization".into(),
                    reason: format!("must be in (0, 1], got {u}"),
                });
            }
        }
        if self.mcus_per_bundle == 0 {
            return Err(ConfigError::Invalid {
                field: "arch_template.mcus_per_bundle".into(),
                reason: "must be >= 1".into(),
            });
        }
        if self.mem_levels.is_empty() {
            return Err(ConfigError::MissingField("arch_template.mem_levels".into()));
        }
        for (i, l) in self.mem_levels.iter().enumerate() {
            if l.name != format!("L{i}") {
                return Err(ConfigError::Invalid {
                    field: "arch_template.mem_levels".into(),
                    reason: format!("level {i} must be named L{i}, got {}", l.name),
                });
            }
        }
        if self.mem_levels.windows(2).any(|w| w[0].scope > w[1].scope) {
            return Err(ConfigError::Constraint(
                "memory-level scopes must widen outward (mcu, bundle, global)".into(),
            ));
        }
        Ok(())
    }
}
