//! Voltage-frequency-power scaling.
//!
//! Frequency follows the alpha-power law with alpha = 1:
//! `f(V) = f_nom (V - V_th) / (V_nom - V_th)`. Dynamic power scales with
//! `V^2 f`, leakage with `V`.

use serde::{Deserialize, Serialize};

use crate::error::SizingError;

/// Bisection stops once the voltage bracket is this narrow.
pub const VOLTAGE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub voltage: f64,
    pub frequency: f64,
    pub unit_count: u64,
    /// Watts per unit at this point.
    pub unit_power: f64,
}

impl OperatingPoint {
    pub fn total_power(&self) -> f64 {
        self.unit_count as f64 * self.unit_power
    }
}

/// One scalable component type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VfModel {
    pub nominal_voltage: f64,
    pub threshold_voltage: f64,
    pub min_voltage: f64,
    pub max_voltage: f64,
    pub nominal_frequency: f64,
    /// Watts per unit at the nominal point.
    pub nominal_unit_power: f64,
    /// Leakage share of `nominal_unit_power`.
    pub static_fraction: f64,
}

impl VfModel {
    pub fn frequency(&self, v: f64) -> f64 {
        if v == self.nominal_voltage {
            return self.nominal_frequency;
        }
        self.nominal_frequency * (v - self.threshold_voltage)
            / (self.nominal_voltage - self.threshold_voltage)
    }

    pub fn unit_power(&self, v: f64) -> f64 {
        if v == self.nominal_voltage {
            return self.nominal_unit_power;
        }
        let r = v / self.nominal_voltage;
        let fr = self.frequency(v) / self.nominal_frequency;
        let s = self.static_fraction;
        self.nominal_unit_power * ((1.0 - s) * r * r * fr + s * r)
    }

    fn point(&self, v: f64, units: u64) -> OperatingPoint {
        OperatingPoint {
            voltage: v,
            frequency: self.frequency(v),
            unit_count: units,
            unit_power: self.unit_power(v),
        }
    }
}

/// Highest-frequency operating point whose total power fits `power_budget`.
///
/// When even the minimum voltage is too hot, the unit count shrinks until it fits.
pub fn scale_vf(
    model: &VfModel,
    power_budget: f64,
    unit_count: u64,
    component: &str,
) -> Result<OperatingPoint, SizingError> {
    if !(power_budget > 0.0) {
        return Err(SizingError::new(component, "power budget is zero"));
    }
    if unit_count == 0 {
        return Err(SizingError::new(component, "no units to power"));
    }
    let total = |v: f64, n: u64| n as f64 * model.unit_power(v);
    let vmin = model.min_voltage;
    let vmax = model.max_voltage;

    if total(vmin, unit_count) > power_budget {
        let fit = (power_budget / model.unit_power(vmin)).floor() as u64;
        if fit == 0 {
            return Err(SizingError::new(
                component,
                format!(
                    "one unit at minimum voltage needs {} W but only {power_budget} W is budgeted",
                    model.unit_power(vmin)
                ),
            ));
        }
        return scale_vf(model, power_budget, fit.min(unit_count - 1), component);
    }
    if total(vmax, unit_count) <= power_budget {
        return Ok(model.point(vmax, unit_count));
    }

    // Invariant: lo is feasible, hi is not.
    let vnom = model.nominal_voltage;
    let (mut lo, mut hi) = if (vmin..vmax).contains(&vnom) {
        if total(vnom, unit_count) <= power_budget {
            (vnom, vmax)
        } else {
            (vmin, vnom)
        }
    } else {
        (vmin, vmax)
    };
    while hi - lo > VOLTAGE_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if total(mid, unit_count) <= power_budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(model.point(lo, unit_count))
}
