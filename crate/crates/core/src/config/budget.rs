//! Resource budgets: absolute area/power/perimeter plus per-component fractions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_yaml::{Mapping, Value};

use crate::error::ConfigError;
use crate::units::parse_quantity;

/// Slack allowed on each fraction group sum.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A budgeted hardware component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Component {
    Core,
    /// On-chip memory level `L<n>`.
    Cache(u8),
    Dram,
    NetIntra,
    NetInter,
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Component::Core => f.write_str("core"),
            Component::Cache(l) => write!(f, "L{l}"),
            Component::Dram => f.write_str("DRAM"),
            Component::NetIntra => f.write_str("net_intra"),
            Component::NetInter => f.write_str("net_inter"),
        }
    }
}

impl FromStr for Component {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "core" => Ok(Component::Core),
            "DRAM" => Ok(Component::Dram),
            "net_intra" => Ok(Component::NetIntra),
            "net_inter" => Ok(Component::NetInter),
            _ => s
                .strip_prefix('L')
                .and_then(|n| n.parse::<u8>().ok())
                .map(Component::Cache)
                .ok_or_else(|| format!("unknown component `{s}`")),
        }
    }
}

impl Serialize for Component {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Component {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub type Fractions = BTreeMap<Component, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceBudget {
    pub node_area_budget: f64,
    pub proc_chip_area_budget: f64,
    pub power_budget: f64,
    pub perimeter_budget: f64,
    /// True when `perimeter_budget` came from the square-die default.
    pub perimeter_inferred: bool,
    pub area_frac: Fractions,
    pub power_frac: Fractions,
    pub perimeter_frac: Fractions,
}

/// Square-die perimeter for a given chip area.
pub fn default_perimeter(chip_area: f64) -> f64 {
    4.0 * chip_area.sqrt()
}

fn num(v: &Value, field: &str) -> Result<f64, ConfigError> {
    let x = match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => parse_quantity(s).ok(),
        _ => None,
    };
    x.filter(|x| x.is_finite()).ok_or_else(|| ConfigError::Invalid {
        field: field.into(),
        reason: format!("expected a number, got {v:?}"),
    })
}

fn key_str(k: &Value, ctx: &str) -> Result<String, ConfigError> {
    k.as_str()
        .map(str::to_string)
        .ok_or_else(|| ConfigError::Parse(format!("{ctx}: non-string key {k:?}")))
}

/// Parse one `*_breakdown` block. `totals` lists the absolute-budget keys it may carry.
fn parse_breakdown(
    v: &Value,
    ctx: &str,
    totals: &[&str],
    strict: bool,
) -> Result<(BTreeMap<String, f64>, Fractions), ConfigError> {
    let map = v
        .as_mapping()
        .ok_or_else(|| ConfigError::Parse(format!("{ctx} must be a mapping")))?;
    let mut abs = BTreeMap::new();
    let mut fr = Fractions::new();
    let mut put = |c: Component, x: f64, field: String| -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(ConfigError::Constraint(format!(
                "{field} = {x} is outside [0, 1]"
            )));
        }
        if fr.insert(c, x).is_some() {
            return Err(ConfigError::Constraint(format!("{field} given twice")));
        }
        Ok(())
    };
    for (k, val) in map {
        let key = key_str(k, ctx)?;
        let field = format!("{ctx}.{key}");
        if totals.contains(&key.as_str()) {
            abs.insert(key, num(val, &field)?);
        } else if key == "network" {
            let inner = val.as_mapping().ok_or_else(|| {
                ConfigError::Parse(format!("{field} must map intra_package/inter_package"))
            })?;
            for (nk, nv) in inner {
                let nk = key_str(nk, &field)?;
                let f2 = format!("{field}.{nk}");
                match nk.as_str() {
                    "intra_package" => put(Component::NetIntra, num(nv, &f2)?, f2)?,
                    "inter_package" => put(Component::NetInter, num(nv, &f2)?, f2)?,
                    _ if strict => return Err(ConfigError::UnknownKey(f2)),
                    _ => {}
                }
            }
        } else {
            match key.parse::<Component>() {
                Ok(c) => put(c, num(val, &field)?, field)?,
                Err(_) if strict => return Err(ConfigError::UnknownKey(field)),
                Err(_) => {}
            }
        }
    }
    let sum: f64 = fr.values().sum();
    if sum > 1.0 + SUM_TOLERANCE {
        return Err(ConfigError::Constraint(format!(
            "{ctx}: fractions sum to {sum}, which exceeds 1"
        )));
    }
    Ok((abs, fr))
}

fn need(abs: &BTreeMap<String, f64>, key: &str, ctx: &str) -> Result<f64, ConfigError> {
    abs.get(key)
        .copied()
        .ok_or_else(|| ConfigError::MissingField(format!("{ctx}.{key}")))
}

impl ResourceBudget {
    /// Parse the `budgets` section value.
    pub fn from_value(v: &Value, strict: bool) -> Result<Self, ConfigError> {
        let map = v
            .as_mapping()
            .ok_or_else(|| ConfigError::Parse("budgets must be a mapping".into()))?;
        let get = |k: &str| map.get(Value::String(k.into()));
        if strict {
            for k in map.keys() {
                let k = key_str(k, "budgets")?;
                if !matches!(
                    k.as_str(),
                    "area_breakdown" | "power_breakdown" | "perimeter_breakdown"
                ) {
                    return Err(ConfigError::UnknownKey(format!("budgets.{k}")));
                }
            }
        }
        let area = get("area_breakdown")
            .ok_or_else(|| ConfigError::MissingField("budgets.area_breakdown".into()))?;
        let power = get("power_breakdown")
            .ok_or_else(|| ConfigError::MissingField("budgets.power_breakdown".into()))?;
        let perim = get("perimeter_breakdown")
            .ok_or_else(|| ConfigError::MissingField("budgets.perimeter_breakdown".into()))?;

        let (a_abs, area_frac) = parse_breakdown(
            area,
            "area_breakdown",
            &["node_area_budget", "proc_chip_area_budget"],
            strict,
        )?;
        let (p_abs, power_frac) =
            parse_breakdown(power, "power_breakdown", &["power_budget"], strict)?;
        let (r_abs, perimeter_frac) =
            parse_breakdown(perim, "perimeter_breakdown", &["perimeter_budget"], strict)?;

        let node = need(&a_abs, "node_area_budget", "area_breakdown")?;
        let chip = need(&a_abs, "proc_chip_area_budget", "area_breakdown")?;
        let power_budget = need(&p_abs, "power_budget", "power_breakdown")?;
        let (perimeter_budget, perimeter_inferred) = match r_abs.get("perimeter_budget") {
            Some(p) => (*p, false),
            None => (default_perimeter(chip), true),
        };
        let b = ResourceBudget {
            node_area_budget: node,
            proc_chip_area_budget: chip,
            power_budget,
            perimeter_budget,
            perimeter_inferred,
            area_frac,
            power_frac,
            perimeter_frac,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (f, v) in [
            ("node_area_budget", self.node_area_budget),
            ("proc_chip_area_budget", self.proc_chip_area_budget),
            ("power_budget", self.power_budget),
            ("perimeter_budget", self.perimeter_budget),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::Invalid {
                    field: f.into(),
                    reason: format!("must be strictly positive, got {v}"),
                });
            }
        }
        if self.proc_chip_area_budget > self.node_area_budget {
            return Err(ConfigError::Constraint(
                "proc_chip_area_budget must not exceed node_area_budget".into(),
            ));
        }
        for (name, g) in [
            ("area", &self.area_frac),
            ("power", &self.power_frac),
            ("perimeter", &self.perimeter_frac),
        ] {
            if g.values().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(ConfigError::Constraint(format!(
                    "{name} fractions must lie in [0, 1]"
                )));
            }
            let s: f64 = g.values().sum();
            if s > 1.0 + SUM_TOLERANCE {
                return Err(ConfigError::Constraint(format!(
                    "{name} fractions sum to {s}, which exceeds 1"
                )));
            }
        }
        Ok(())
    }

    pub fn area(&self, c: Component) -> f64 {
        self.area_frac.get(&c).copied().unwrap_or(0.0) * self.proc_chip_area_budget
    }

    pub fn power(&self, c: Component) -> f64 {
        self.power_frac.get(&c).copied().unwrap_or(0.0) * self.power_budget
    }

    pub fn perimeter(&self, c: Component) -> f64 {
        self.perimeter_frac.get(&c).copied().unwrap_or(0.0) * self.perimeter_budget
    }

    /// Document form, inverse of [`ResourceBudget::from_value`].
    pub fn to_value(&self) -> Value {
        fn group(fr: &Fractions, totals: &[(&str, f64)]) -> Value {
            let mut m = Mapping::new();
            for (k, v) in totals {
                m.insert(Value::from(*k), Value::from(*v));
            }
            let mut net = Mapping::new();
            for (c, v) in fr {
                match c {
                    Component::NetIntra => {
                        net.insert("intra_package".into(), Value::from(*v));
                    }
                    Component::NetInter => {
                        net.insert("inter_package".into(), Value::from(*v));
                    }
                    _ => {
                        m.insert(Value::from(c.to_string()), Value::from(*v));
                    }
                }
            }
            if !net.is_empty() {
                m.insert("network".into(), Value::Mapping(net));
            }
            Value::Mapping(m)
        }
        let mut out = Mapping::new();
        out.insert(
            "area_breakdown".into(),
            group(
                &self.area_frac,
                &[
                    ("node_area_budget", self.node_area_budget),
                    ("proc_chip_area_budget", self.proc_chip_area_budget),
                ],
            ),
        );
        out.insert(
            "power_breakdown".into(),
            group(&self.power_frac, &[("power_budget", self.power_budget)]),
        );
        let perim: Vec<(&str, f64)> = if self.perimeter_inferred {
            vec![]
        } else {
            vec![("perimeter_budget", self.perimeter_budget)]
        };
        out.insert(
            "perimeter_breakdown".into(),
            group(&self.perimeter_frac, &perim),
        );
        Value::Mapping(out)
    }

    /// Replace all three fraction groups, keeping absolute budgets.
    pub fn with_fractions(&self, area: Fractions, power: Fractions, perim: Fractions) -> Self {
        ResourceBudget {
            area_frac: area,
            power_frac: power,
            perimeter_frac: perim,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(area: &str) -> Value {
        let text = format!(
            "area_breakdown:\n  node_area_budget: 1230\n  proc_chip_area_budget: 815\n{area}\n\
             power_breakdown:\n  power_budget: 300\n  core: 0.5\n\
             perimeter_breakdown:\n  DRAM: 0.5\n"
        );
        serde_yaml::from_str(&text).unwrap()
    }

    #[test]
    fn figure_snippet_sums_to_one() {
        let v = doc("  core: 0.35\n  L2: 0.14\n  L1: 0.1\n  L0: 0.2\n  DRAM: 0.05\n  network:\n    intra_package: 0.06\n    inter_package: 0.1");
        let b = ResourceBudget::from_value(&v, true).unwrap();
        let s: f64 = b.area_frac.values().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(b.area_frac[&Component::NetInter], 0.1);
        assert!(b.perimeter_inferred);
        assert!((b.perimeter_budget - 4.0 * 815f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn simplex_vertex_is_valid() {
        let v = doc("  core: 1.0");
        assert!(ResourceBudget::from_value(&v, true).is_ok());
    }

    #[test]
    fn oversubscribed_group_rejected() {
        let v = doc("  core: 0.9\n  L2: 0.2");
        assert!(matches!(
            ResourceBudget::from_value(&v, true),
            Err(ConfigError::Constraint(_))
        ));
    }

    #[test]
    fn sum_tolerance_is_exact() {
        let ok = doc(&format!("  core: 0.5\n  L1: {}", 0.5 + 0.9e-9));
        assert!(ResourceBudget::from_value(&ok, true).is_ok());
        let bad = doc(&format!("  core: 0.5\n  L1: {}", 0.5 + 1.1e-9));
        assert!(ResourceBudget::from_value(&bad, true).is_err());
    }

    #[test]
    fn unknown_component_strict_vs_lenient() {
        let v = doc("  core: 0.3\n  gpu: 0.1");
        assert!(matches!(
            ResourceBudget::from_value(&v, true),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(ResourceBudget::from_value(&v, false).is_ok());
    }

    #[test]
    fn round_trip() {
        let v = doc("  core: 0.35\n  L0: 0.2\n  network:\n    inter_package: 0.1");
        let b = ResourceBudget::from_value(&v, true).unwrap();
        let again = ResourceBudget::from_value(&b.to_value(), true).unwrap();
        assert_eq!(b, again);
    }
}
