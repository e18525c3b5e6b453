//! Technology library: per-component physical parameters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::units::{de_f64, de_opt_f64};

fn one() -> f64 {
    1.0
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputeTech {
    pub tech_node: String,
    #[serde(deserialize_with = "de_f64")]
    pub nominal_voltage: f64,
    #[serde(deserialize_with = "de_f64")]
    pub threshold_voltage: f64,
    #[serde(deserialize_with = "de_f64")]
    pub nominal_frequency: f64,
    /// Operations per cycle of one compute unit.
    #[serde(deserialize_with = "de_f64")]
    pub nominal_op_rate: f64,
    /// Watts per unit at the nominal point. Derived from
    /// `default_power_density` when absent.
    #[serde(
        default,
        deserialize_with = "de_opt_f64",
        skip_serializing_if = "Option::is_none"
    )]
    pub nominal_power: Option<f64>,
    /// mm² per unit.
    #[serde(deserialize_with = "de_f64")]
    pub nominal_area: f64,
    #[serde(deserialize_with = "de_f64")]
    pub min_voltage: f64,
    #[serde(deserialize_with = "de_f64")]
    pub max_voltage: f64,
    #[serde(default = "one", deserialize_with = "de_f64", skip_serializing_if = "is_one")]
    pub max_utilization: f64,
    /// Share of nominal unit power that is leakage.
    #[serde(default, deserialize_with = "de_f64", skip_serializing_if = "is_zero")]
    pub static_power_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnChipMemTech {
    #[serde(deserialize_with = "de_f64")]
    pub dynamic_energy_per_bit: f64,
    #[serde(deserialize_with = "de_f64")]
    pub static_power_per_bit: f64,
    #[serde(deserialize_with = "de_f64")]
    pub area_per_bit: f64,
    #[serde(deserialize_with = "de_f64")]
    pub bank_capacity: f64,
    #[serde(deserialize_with = "de_f64")]
    pub bank_periphery_area_overhead: f64,
    #[serde(deserialize_with = "de_f64")]
    pub controller_area_per_bank: f64,
    #[serde(deserialize_with = "de_f64")]
    pub controller_power_per_bank: f64,
    #[serde(deserialize_with = "de_f64")]
    pub latency: f64,
    /// Crossbar area per (bank, port) pair; defaults to `controller_area_per_bank`.
    #[serde(
        default,
        deserialize_with = "de_opt_f64",
        skip_serializing_if = "Option::is_none"
    )]
    pub xbar_area_per_bank_port: Option<f64>,
    /// Crossbar power per (bank, port) pair; defaults to `controller_power_per_bank`.
    #[serde(
        default,
        deserialize_with = "de_opt_f64",
        skip_serializing_if = "Option::is_none"
    )]
    pub xbar_power_per_bank_port: Option<f64>,
}

impl OnChipMemTech {
    pub fn xbar_area(&self) -> f64 {
        self.xbar_area_per_bank_port
            .unwrap_or(self.controller_area_per_bank)
    }

    pub fn xbar_power(&self) -> f64 {
        self.xbar_power_per_bank_port
            .unwrap_or(self.controller_power_per_bank)
    }

    fn scale(&mut self, area: f64, power: f64) {
        self.area_per_bit /= area;
        self.bank_periphery_area_overhead /= area;
        self.controller_area_per_bank /= area;
        if let Some(a) = self.xbar_area_per_bank_port.as_mut() {
            *a /= area;
        }
        self.dynamic_energy_per_bit /= power;
        self.static_power_per_bit /= power;
        self.controller_power_per_bank /= power;
        if let Some(p) = self.xbar_power_per_bank_port.as_mut() {
            *p /= power;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffChipMemTech {
    #[serde(deserialize_with = "de_f64")]
    pub dynamic_energy_per_bit: f64,
    #[serde(deserialize_with = "de_f64")]
    pub static_power_per_bit: f64,
    /// Bits per device.
    #[serde(deserialize_with = "de_f64")]
    pub device_capacity: f64,
    #[serde(deserialize_with = "de_f64")]
    pub device_area: f64,
    #[serde(deserialize_with = "de_f64")]
    pub controller_io_area_per_device: f64,
    #[serde(deserialize_with = "de_f64")]
    pub links_per_device: f64,
    /// Data-bus escape density along the chip edge.
    #[serde(deserialize_with = "de_f64")]
    pub links_per_mm: f64,
    #[serde(deserialize_with = "de_f64")]
    pub nominal_voltage: f64,
    #[serde(deserialize_with = "de_f64")]
    pub nominal_frequency: f64,
    #[serde(deserialize_with = "de_f64")]
    pub min_voltage: f64,
    #[serde(deserialize_with = "de_f64")]
    pub max_voltage: f64,
    #[serde(default, deserialize_with = "de_f64", skip_serializing_if = "is_zero")]
    pub threshold_voltage: f64,
    #[serde(deserialize_with = "de_f64")]
    pub access_latency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetTech {
    #[serde(deserialize_with = "de_f64")]
    pub nominal_voltage: f64,
    #[serde(deserialize_with = "de_f64")]
    pub nominal_frequency: f64,
    #[serde(deserialize_with = "de_f64")]
    pub energy_per_link: f64,
    #[serde(deserialize_with = "de_f64")]
    pub area_per_link: f64,
    #[serde(deserialize_with = "de_f64")]
    pub links_per_mm: f64,
    #[serde(deserialize_with = "de_f64")]
    pub threshold_voltage: f64,
    #[serde(deserialize_with = "de_f64")]
    pub min_voltage: f64,
    /// Defaults to `nominal_voltage` (no overdrive).
    #[serde(
        default,
        deserialize_with = "de_opt_f64",
        skip_serializing_if = "Option::is_none"
    )]
    pub max_voltage: Option<f64>,
    #[serde(deserialize_with = "de_f64")]
    pub link_latency: f64,
    #[serde(default = "one", deserialize_with = "de_f64", skip_serializing_if = "is_one")]
    pub bits_per_cycle: f64,
}

impl NetTech {
    pub fn max_voltage(&self) -> f64 {
        self.max_voltage.unwrap_or(self.nominal_voltage)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTech {
    pub intra_node: NetTech,
    pub inter_node: NetTech,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechLibrary {
    pub compute: ComputeTech,
    /// Keyed by level name (`L0`, `L1`, ...).
    pub on_chip_mem: BTreeMap<String, OnChipMemTech>,
    pub off_chip_mem: OffChipMemTech,
    pub network: NetworkTech,
    /// W/mm², used only when `compute.nominal_power` is absent.
    #[serde(
        default,
        deserialize_with = "de_opt_f64",
        skip_serializing_if = "Option::is_none"
    )]
    pub default_power_density: Option<f64>,
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Invalid {
            field: field.into(),
            reason: format!("must be strictly positive, got {v}"),
        })
    }
}

fn voltages(prefix: &str, th: f64, min: f64, nom: f64, max: f64) -> Result<(), ConfigError> {
    if th < 0.0 || !(th < min && min <= nom && nom <= max) {
        return Err(ConfigError::Constraint(format!(
            "{prefix}: threshold_voltage < min_voltage <= nominal_voltage <= max_voltage \
             violated ({th} / {min} / {nom} / {max})"
        )));
    }
    Ok(())
}

impl TechLibrary {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let c = &self.compute;
        for (f, v) in [
            ("compute.nominal_voltage", c.nominal_voltage),
            ("compute.nominal_frequency", c.nominal_frequency),
            ("compute.nominal_op_rate", c.nominal_op_rate),
            ("compute.nominal_area", c.nominal_area),
            ("compute.max_utilization", c.max_utilization),
        ] {
            positive(f, v)?;
        }
        if let Some(p) = c.nominal_power {
            positive("compute.nominal_power", p)?;
        } else {
            match self.default_power_density {
                Some(d) => positive("default_power_density", d)?,
                None => return Err(ConfigError::MissingField("compute.nominal_power".into())),
            }
        }
        if c.max_utilization > 1.0 {
            return Err(ConfigError::Constraint(
                "compute.max_utilization must be <= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&c.static_power_fraction) {
            return Err(ConfigError::Constraint(
                "compute.static_power_fraction must be in [0, 1)".into(),
            ));
        }
        voltages(
            "compute",
            c.threshold_voltage,
            c.min_voltage,
            c.nominal_voltage,
            c.max_voltage,
        )?;

        for (name, m) in &self.on_chip_mem {
            let p = format!("on_chip_mem.{name}");
            for (f, v) in [
                ("dynamic_energy_per_bit", m.dynamic_energy_per_bit),
                ("static_power_per_bit", m.static_power_per_bit),
                ("area_per_bit", m.area_per_bit),
                ("bank_capacity", m.bank_capacity),
                ("bank_periphery_area_overhead", m.bank_periphery_area_overhead),
                ("controller_area_per_bank", m.controller_area_per_bank),
                ("controller_power_per_bank", m.controller_power_per_bank),
                ("latency", m.latency),
            ] {
                positive(&format!("{p}.{f}"), v)?;
            }
            if let Some(v) = m.xbar_area_per_bank_port {
                positive(&format!("{p}.xbar_area_per_bank_port"), v)?;
            }
            if let Some(v) = m.xbar_power_per_bank_port {
                positive(&format!("{p}.xbar_power_per_bank_port"), v)?;
            }
        }

        let o = &self.off_chip_mem;
        for (f, v) in [
            ("dynamic_energy_per_bit", o.dynamic_energy_per_bit),
            ("static_power_per_bit", o.static_power_per_bit),
            ("device_capacity", o.device_capacity),
            ("device_area", o.device_area),
            ("controller_io_area_per_device", o.controller_io_area_per_device),
            ("links_per_device", o.links_per_device),
            ("links_per_mm", o.links_per_mm),
            ("nominal_frequency", o.nominal_frequency),
            ("access_latency", o.access_latency),
        ] {
            positive(&format!("off_chip_mem.{f}"), v)?;
        }
        voltages(
            "off_chip_mem",
            o.threshold_voltage,
            o.min_voltage,
            o.nominal_voltage,
            o.max_voltage,
        )?;

        for (lvl, n) in [
            ("network.intra_node", &self.network.intra_node),
            ("network.inter_node", &self.network.inter_node),
        ] {
            for (f, v) in [
                ("nominal_frequency", n.nominal_frequency),
                ("energy_per_link", n.energy_per_link),
                ("area_per_link", n.area_per_link),
                ("links_per_mm", n.links_per_mm),
                ("link_latency", n.link_latency),
                ("bits_per_cycle", n.bits_per_cycle),
            ] {
                positive(&format!("{lvl}.{f}"), v)?;
            }
            voltages(
                lvl,
                n.threshold_voltage,
                n.min_voltage,
                n.nominal_voltage,
                n.max_voltage(),
            )?;
        }
        Ok(())
    }

    /// Nominal per-unit compute power, and whether it was derived from the
    /// library power density.
    pub fn compute_nominal_power(&self) -> (f64, bool) {
        match self.compute.nominal_power {
            Some(p) => (p, false),
            None => (
                self.compute.nominal_area * self.default_power_density.unwrap_or(0.0),
                true,
            ),
        }
    }

    /// Move `steps` logic nodes forward: compute and on-chip memory area
    /// shrink by 1.8x and power by 1.3x per step.
    pub fn scale_logic(&self, steps: i32, label: &str) -> TechLibrary {
        let area = 1.8f64.powi(steps);
        let power = 1.3f64.powi(steps);
        let mut t = self.clone();
        t.compute.tech_node = label.to_string();
        t.compute.nominal_area /= area;
        if let Some(p) = t.compute.nominal_power.as_mut() {
            *p /= power;
        }
        if let Some(d) = t.default_power_density.as_mut() {
            // Keep derived unit power on the same 1.3x trajectory.
            *d *= area / power;
        }
        for m in t.on_chip_mem.values_mut() {
            m.scale(area, power);
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn reference_library_validates() {
        presets::tech_n12().validate().unwrap();
    }

    #[test]
    fn inverted_threshold_rejected() {
        let mut t = presets::tech_n12();
        t.compute.threshold_voltage = 0.9;
        t.compute.nominal_voltage = 0.8;
        assert!(matches!(t.validate(), Err(ConfigError::Constraint(_))));
    }

    #[test]
    fn logic_scaling_rule() {
        let base = presets::tech_n12();
        let s = base.scale_logic(2, "N5");
        let r = base.compute.nominal_area / s.compute.nominal_area;
        assert!((r - 1.8 * 1.8).abs() < 1e-12);
        let p = base.compute.nominal_power.unwrap() / s.compute.nominal_power.unwrap();
        assert!((p - 1.3 * 1.3).abs() < 1e-12);
        assert_eq!(s.off_chip_mem, base.off_chip_mem);
    }
}
