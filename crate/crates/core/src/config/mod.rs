//! Input documents: parsing, strict key checking, validation and merging.
//!
//! A config document is YAML with any subset of the top-level sections
//! `tech`, `arch_template`, `budgets`, `system` and `model`. Several documents
//! may be merged as long as no section appears twice.

pub mod budget;
pub mod model;
pub mod strategy;
pub mod system;
pub mod tech;
pub mod template;

use serde::{Deserialize, Serialize};
use serde_yaml::Value;

pub use budget::{Component, Fractions, ResourceBudget};
pub use model::{GemmSpec, LmSpec, MlpSpec, ModelKind, ModelSpec};
pub use strategy::{parse_strategy, KernelKind, ParallelismStrategy};
pub use system::{SystemGraph, Topology, TopologyKind};
pub use tech::{ComputeTech, NetTech, NetworkTech, OffChipMemTech, OnChipMemTech, TechLibrary};
pub use template::{ArchTemplate, Dataflow, McuTemplate, MemLevelTemplate, Scope};

use crate::error::ConfigError;

#[derive(Debug, Deserialize)]
struct RawDocument {
    #[serde(default)]
    tech: Option<TechLibrary>,
    #[serde(default)]
    arch_template: Option<ArchTemplate>,
    #[serde(default)]
    budgets: Option<Value>,
    #[serde(default)]
    system: Option<SystemGraph>,
    #[serde(default)]
    model: Option<ModelSpec>,
}

/// A parsed, validated document. Every section is optional.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigDocument {
    pub tech: Option<TechLibrary>,
    pub arch_template: Option<ArchTemplate>,
    pub budgets: Option<ResourceBudget>,
    pub system: Option<SystemGraph>,
    pub model: Option<ModelSpec>,
}

/// All inputs needed to generate hardware and predict a workload.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub tech: TechLibrary,
    pub arch_template: ArchTemplate,
    pub budgets: ResourceBudget,
    pub system: SystemGraph,
    pub model: ModelSpec,
}

fn map_serde_error(msg: String) -> ConfigError {
    if msg.contains("missing field") {
        ConfigError::MissingField(msg)
    } else {
        ConfigError::Parse(msg)
    }
}

/// Parse a document. Strict mode rejects any key the schema does not know.
pub fn parse_document(text: &str, strict: bool) -> Result<ConfigDocument, ConfigError> {
    let mut unknown = Vec::new();
    let de = serde_yaml::Deserializer::from_str(text);
    let raw: RawDocument = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
        .map_err(|e| map_serde_error(e.to_string()))?;
    if strict {
        if let Some(k) = unknown.into_iter().next() {
            return Err(ConfigError::UnknownKey(k));
        }
    }
    let doc = ConfigDocument {
        budgets: raw
            .budgets
            .as_ref()
            .map(|v| ResourceBudget::from_value(v, strict))
            .transpose()?,
        tech: raw.tech,
        arch_template: raw.arch_template,
        system: raw.system,
        model: raw.model,
    };
    doc.validate()?;
    Ok(doc)
}

impl ConfigDocument {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(t) = &self.tech {
            t.validate()?;
        }
        if let Some(t) = &self.arch_template {
            t.validate()?;
        }
        if let Some(b) = &self.budgets {
            b.validate()?;
        }
        if let Some(s) = &self.system {
            s.validate()?;
        }
        if let Some(m) = &self.model {
            m.validate()?;
        }
        Ok(())
    }

    /// Union of two documents; a section present in both is an error.
    pub fn merge(mut self, other: ConfigDocument) -> Result<Self, ConfigError> {
        fn take<T>(a: &mut Option<T>, b: Option<T>, name: &str) -> Result<(), ConfigError> {
            match (a.is_some(), b) {
                (true, Some(_)) => Err(ConfigError::DuplicateSection(name.into())),
                (_, Some(v)) => {
                    *a = Some(v);
                    Ok(())
                }
                _ => Ok(()),
            }
        }
        take(&mut self.tech, other.tech, "tech")?;
        take(&mut self.arch_template, other.arch_template, "arch_template")?;
        take(&mut self.budgets, other.budgets, "budgets")?;
        take(&mut self.system, other.system, "system")?;
        take(&mut self.model, other.model, "model")?;
        Ok(self)
    }

    /// Fill sections still missing from `defaults`.
    pub fn or(mut self, defaults: ConfigDocument) -> Self {
        self.tech = self.tech.or(defaults.tech);
        self.arch_template = self.arch_template.or(defaults.arch_template);
        self.budgets = self.budgets.or(defaults.budgets);
        self.system = self.system.or(defaults.system);
        self.model = self.model.or(defaults.model);
        self
    }

    pub fn resolve(self) -> Result<ResolvedConfig, ConfigError> {
        let missing = |s: &str| ConfigError::MissingField(s.to_string());
        Ok(ResolvedConfig {
            tech: self.tech.ok_or_else(|| missing("tech"))?,
            arch_template: self.arch_template.ok_or_else(|| missing("arch_template"))?,
            budgets: self.budgets.ok_or_else(|| missing("budgets"))?,
            system: self.system.ok_or_else(|| missing("system"))?,
            model: self.model.ok_or_else(|| missing("model"))?,
        })
    }

    pub fn to_yaml(&self) -> String {
        let mut m = serde_yaml::Mapping::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                m.insert(k.into(), v);
            }
        };
        put("tech", self.tech.as_ref().map(to_value));
        put("arch_template", self.arch_template.as_ref().map(to_value));
        put("budgets", self.budgets.as_ref().map(ResourceBudget::to_value));
        put("system", self.system.as_ref().map(to_value));
        put("model", self.model.as_ref().map(to_value));
        serde_yaml::to_string(&Value::Mapping(m)).expect("yaml serialization")
    }
}

impl From<ResolvedConfig> for ConfigDocument {
    fn from(r: ResolvedConfig) -> Self {
        ConfigDocument {
            tech: Some(r.tech),
            arch_template: Some(r.arch_template),
            budgets: Some(r.budgets),
            system: Some(r.system),
            model: Some(r.model),
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_yaml::to_value(v).expect("yaml serialization")
}

/// Parse a document holding a `tech` section.
pub fn parse_tech_library(text: &str) -> Result<TechLibrary, ConfigError> {
    parse_document(text, true)?
        .tech
        .ok_or_else(|| ConfigError::MissingField("tech".into()))
}

/// Parse a document holding a `budgets` section.
pub fn parse_budget(text: &str) -> Result<ResourceBudget, ConfigError> {
    parse_document(text, true)?
        .budgets
        .ok_or_else(|| ConfigError::MissingField("budgets".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn preset_documents_round_trip() {
        for text in [presets::REFERENCE_YAML, presets::CASE_STUDY_YAML] {
            let doc = parse_document(text, true).unwrap();
            let again = parse_document(&doc.to_yaml(), true).unwrap();
            assert_eq!(doc, again);
        }
    }

    #[test]
    fn tech_values_with_suffixes() {
        let t = parse_tech_library(presets::REFERENCE_YAML).unwrap();
        assert_eq!(t.compute.nominal_frequency, 1.2e9);
        assert_eq!(t.compute.nominal_op_rate, 128.0);
    }

    #[test]
    fn missing_mandatory_field_is_named() {
        let text = presets::REFERENCE_YAML.replacen("dynamic_energy_per_bit: 0.03p", "", 1);
        let err = parse_tech_library(&text).unwrap_err();
        match err {
            ConfigError::MissingField(m) => assert!(m.contains("dynamic_energy_per_bit"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_strict_and_lenient() {
        let text = format!("{}\nextra_section: 1\n", presets::REFERENCE_YAML);
        assert!(matches!(
            parse_document(&text, true),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(parse_document(&text, false).is_ok());
        let nested = presets::REFERENCE_YAML.replacen("tech_node: N12", "tech_node: N12\n    colour: red", 1);
        assert!(matches!(
            parse_document(&nested, true),
            Err(ConfigError::UnknownKey(k)) if k.contains("colour")
        ));
    }

    #[test]
    fn merge_rejects_duplicates() {
        let a = parse_document(presets::REFERENCE_YAML, true).unwrap();
        let b = a.clone();
        assert!(matches!(a.merge(b), Err(ConfigError::DuplicateSection(_))));
    }
}
