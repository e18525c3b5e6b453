//! Component sizers: compute cores, cache levels, main memory, network links.

use serde::{Deserialize, Serialize};

use super::vf::{scale_vf, OperatingPoint, VfModel};
use crate::config::{ComputeTech, NetTech, OffChipMemTech, OnChipMemTech, Scope};
use crate::error::SizingError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreSpec {
    /// Units that fit the area budget before any power-driven reduction.
    pub units_by_area: u64,
    pub operating_point: OperatingPoint,
    /// Operations per cycle per unit.
    pub op_rate: f64,
    /// Flops/s at the operating point, before utilization derating.
    pub throughput: f64,
    pub area_used: f64,
}

/// Number of whole units of `unit_area` that fit in `area_budget`.
pub fn units_in_area(area_budget: f64, unit_area: f64) -> u64 {
    (area_budget / unit_area).floor().max(0.0) as u64
}

pub fn size_cores(
    area_budget: f64,
    power_budget: f64,
    tech: &ComputeTech,
    nominal_unit_power: f64,
) -> Result<CoreSpec, SizingError> {
    let n = units_in_area(area_budget, tech.nominal_area);
    if n == 0 {
        return Err(SizingError::new(
            "core",
            format!(
                "area budget {area_budget} mm² is below one unit ({} mm²)",
                tech.nominal_area
            ),
        ));
    }
    let model = VfModel {
        nominal_voltage: tech.nominal_voltage,
        threshold_voltage: tech.threshold_voltage,
        min_voltage: tech.min_voltage,
        max_voltage: tech.max_voltage,
        nominal_frequency: tech.nominal_frequency,
        nominal_unit_power,
        static_fraction: tech.static_power_fraction,
    };
    let op = scale_vf(&model, power_budget, n, "core")?;
    Ok(CoreSpec {
        units_by_area: n,
        throughput: core_throughput(op.unit_count, tech.nominal_op_rate, op.frequency),
        operating_point: op,
        op_rate: tech.nominal_op_rate,
        area_used: op.unit_count as f64 * tech.nominal_area,
    })
}

/// `N` units at `op_rate` operations per cycle and clock `f`.
pub fn core_throughput(n: u64, op_rate: f64, f: f64) -> f64 {
    n as f64 * op_rate * f
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemLevelSpec {
    pub name: String,
    pub scope: Scope,
    /// Total bits across all instances.
    pub capacity: f64,
    /// Total bits/s across all instances.
    pub bandwidth: f64,
    pub latency: f64,
    pub num_banks: u64,
    pub bank_capacity: f64,
    pub instances: u64,
    /// Lower-level components served by each instance.
    pub fanout: u64,
    pub static_power: f64,
    pub overhead_power: f64,
    pub area_used: f64,
    pub power_used: f64,
}

impl MemLevelSpec {
    /// Bytes one instance can hold.
    pub fn instance_bytes(&self) -> f64 {
        self.capacity / 8.0 / self.instances as f64
    }
}

/// Leakage of `banks` banks of `bank_capacity` bits each.
pub fn cache_static_power(static_power_per_bit: f64, banks: u64, bank_capacity: f64) -> f64 {
    static_power_per_bit * banks as f64 * bank_capacity
}

/// Bandwidth the remaining dynamic power buys.
pub fn cache_bandwidth(p_level: f64, p_static: f64, p_overhead: f64, energy_per_bit: f64) -> f64 {
    (p_level - p_static - p_overhead) / energy_per_bit
}

/// Area of `banks` banks including crossbar/controller overhead.
pub fn cache_area(tech: &OnChipMemTech, banks: u64, fanout: u64) -> f64 {
    let n = banks as f64;
    n * (tech.area_per_bit * tech.bank_capacity + tech.bank_periphery_area_overhead)
        + tech.xbar_area() * n * fanout as f64
}

pub fn size_cache_level(
    name: &str,
    scope: Scope,
    area_budget: f64,
    power_budget: f64,
    tech: &OnChipMemTech,
    fanout: u64,
    instances: u64,
) -> Result<MemLevelSpec, SizingError> {
    if !(area_budget > 0.0) || !(power_budget > 0.0) {
        return Err(SizingError::new(name, "area and power budgets must be positive"));
    }
    // Largest bank count that fits; area is monotone in the count.
    let fits = |n: u64| cache_area(tech, n, fanout) <= area_budget;
    let mut lo = 0u64;
    let mut hi = 1u64;
    while fits(hi) {
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let banks = lo / instances * instances;
    if banks == 0 {
        return Err(SizingError::new(
            name,
            format!("area budget {area_budget} mm² cannot give each of {instances} instances a bank"),
        ));
    }
    let p_static = cache_static_power(tech.static_power_per_bit, banks, tech.bank_capacity);
    let p_over = tech.xbar_power() * banks as f64 * fanout as f64;
    if p_static + p_over >= power_budget {
        return Err(SizingError::new(
            name,
            format!(
                "static {p_static} W plus overhead {p_over} W leaves no dynamic power out of {power_budget} W"
            ),
        ));
    }
    Ok(MemLevelSpec {
        name: name.to_string(),
        scope,
        capacity: banks as f64 * tech.bank_capacity,
        bandwidth: cache_bandwidth(power_budget, p_static, p_over, tech.dynamic_energy_per_bit),
        latency: tech.latency,
        num_banks: banks,
        bank_capacity: tech.bank_capacity,
        instances,
        fanout,
        static_power: p_static,
        overhead_power: p_over,
        area_used: cache_area(tech, banks, fanout),
        power_used: power_budget,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainMemSpec {
    pub capacity: f64,
    pub bandwidth: f64,
    pub num_devices: u64,
    /// The three limits of the device min-rule: substrate area, controller area, perimeter.
    pub device_limits: [u64; 3],
    pub latency: f64,
    pub operating_point: OperatingPoint,
    pub static_power: f64,
    pub area_used: f64,
    pub power_used: f64,
    pub perimeter_used: f64,
}

/// Devices supported by substrate area, controller area and chip-edge escape.
#[allow(clippy::too_many_arguments)]
pub fn device_limits(
    node_area: f64,
    chip_area: f64,
    device_area: f64,
    ctrl_area_budget: f64,
    ctrl_area_per_device: f64,
    perimeter: f64,
    links_per_mm: f64,
    links_per_device: f64,
) -> [u64; 3] {
    let f = |x: f64| x.floor().max(0.0) as u64;
    [
        f((node_area - chip_area) / device_area),
        f(ctrl_area_budget / ctrl_area_per_device),
        f(perimeter * links_per_mm / links_per_device),
    ]
}

pub fn size_main_memory(
    ctrl_area_budget: f64,
    power_budget: f64,
    perimeter_budget: f64,
    tech: &OffChipMemTech,
    node_area: f64,
    chip_area: f64,
) -> Result<MainMemSpec, SizingError> {
    if node_area <= chip_area {
        return Err(SizingError::new(
            "DRAM",
            "node area leaves no substrate room for memory devices",
        ));
    }
    let limits = device_limits(
        node_area,
        chip_area,
        tech.device_area,
        ctrl_area_budget,
        tech.controller_io_area_per_device,
        perimeter_budget,
        tech.links_per_mm,
        tech.links_per_device,
    );
    let devices = *limits.iter().min().expect("three limits");
    if devices == 0 {
        return Err(SizingError::new(
            "DRAM",
            format!("no memory device fits (substrate, controller, perimeter limits {limits:?})"),
        ));
    }
    let capacity = devices as f64 * tech.device_capacity;
    let p_static = tech.static_power_per_bit * capacity;
    if p_static >= power_budget {
        return Err(SizingError::new(
            "DRAM",
            format!("static power {p_static} W exhausts the {power_budget} W budget"),
        ));
    }
    let links = (devices as f64 * tech.links_per_device) as u64;
    let model = VfModel {
        nominal_voltage: tech.nominal_voltage,
        threshold_voltage: tech.threshold_voltage,
        min_voltage: tech.min_voltage,
        max_voltage: tech.max_voltage,
        nominal_frequency: tech.nominal_frequency,
        nominal_unit_power: tech.dynamic_energy_per_bit * tech.nominal_frequency,
        static_fraction: 0.0,
    };
    let op = scale_vf(&model, power_budget - p_static, links, "DRAM")?;
    Ok(MainMemSpec {
        capacity,
        bandwidth: op.unit_count as f64 * op.frequency,
        num_devices: devices,
        device_limits: limits,
        latency: tech.access_latency,
        operating_point: op,
        static_power: p_static,
        area_used: devices as f64 * tech.controller_io_area_per_device,
        power_used: p_static + op.total_power(),
        perimeter_used: op.unit_count as f64 / tech.links_per_mm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetLevel {
    Intra,
    Inter,
}

impl NetLevel {
    pub fn component(self) -> &'static str {
        match self {
            NetLevel::Intra => "net_intra",
            NetLevel::Inter => "net_inter",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub level: NetLevel,
    /// Bits/s of one electrical link.
    pub link_bandwidth: f64,
    pub num_links: u64,
    /// Bits/s over all links of the node.
    pub bandwidth: f64,
    pub latency: f64,
    pub operating_point: OperatingPoint,
    pub area_used: f64,
    pub power_used: f64,
    pub perimeter_used: f64,
}

pub fn size_network(
    area_budget: f64,
    power_budget: f64,
    perimeter_share: f64,
    tech: &NetTech,
    level: NetLevel,
) -> Result<NetSpec, SizingError> {
    let name = level.component();
    let by_area = units_in_area(area_budget, tech.area_per_link);
    let by_edge = (perimeter_share * tech.links_per_mm).floor().max(0.0) as u64;
    let links = by_area.min(by_edge);
    if links == 0 {
        return Err(SizingError::new(
            name,
            format!("no links fit (area allows {by_area}, perimeter allows {by_edge})"),
        ));
    }
    let model = VfModel {
        nominal_voltage: tech.nominal_voltage,
        threshold_voltage: tech.threshold_voltage,
        min_voltage: tech.min_voltage,
        max_voltage: tech.max_voltage(),
        nominal_frequency: tech.nominal_frequency,
        nominal_unit_power: tech.energy_per_link * tech.nominal_frequency * tech.bits_per_cycle,
        static_fraction: 0.0,
    };
    let op = scale_vf(&model, power_budget, links, name)?;
    let per_link = op.frequency * tech.bits_per_cycle;
    Ok(NetSpec {
        level,
        link_bandwidth: per_link,
        num_links: op.unit_count,
        bandwidth: op.unit_count as f64 * per_link,
        latency: tech.link_latency,
        operating_point: op,
        area_used: op.unit_count as f64 * tech.area_per_link,
        power_used: op.total_power(),
        perimeter_used: op.unit_count as f64 / tech.links_per_mm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn throughput_identity() {
        // 1024 units of 128 Gflop/s nominal at three quarters clock.
        let t = core_throughput(1024, 128.0, 0.75e9);
        assert!((t - 98_304e9).abs() / t < 1e-15);
    }

    #[test]
    fn too_small_for_one_core() {
        let tech = presets::tech_n12().compute;
        let err = size_cores(tech.nominal_area * 0.5, 100.0, &tech, 0.35).unwrap_err();
        assert_eq!(err.component, "core");
    }

    #[test]
    fn static_power_and_bandwidth_equations() {
        assert!((cache_static_power(1e-11, 100, 1e6) - 1e-3).abs() < 1e-15);
        assert_eq!(cache_bandwidth(10.0, 2.0, 0.0, 1e-12), 8e12);
    }

    #[test]
    fn zero_dynamic_headroom_is_an_error() {
        let tech = presets::tech_n12().on_chip_mem["L1"].clone();
        let banks_area = cache_area(&tech, 100, 1);
        let p_static = cache_static_power(tech.static_power_per_bit, 100, tech.bank_capacity)
            + tech.xbar_power() * 100.0;
        let err = size_cache_level("L1", Scope::Bundle, banks_area, p_static, &tech, 1, 1).unwrap_err();
        assert_eq!(err.component, "L1");
    }

    #[test]
    fn cache_banks_maximal() {
        let tech = presets::tech_n12().on_chip_mem["L2"].clone();
        let l = size_cache_level("L2", Scope::Global, 100.0, 20.0, &tech, 16, 1).unwrap();
        assert!(cache_area(&tech, l.num_banks, 16) <= 100.0);
        assert!(cache_area(&tech, l.num_banks + 1, 16) > 100.0);
    }

    #[test]
    fn device_min_rule() {
        assert_eq!(
            device_limits(1230.0, 815.0, 100.0, 40.0, 8.0, 120.0, 50.0, 1024.0),
            [4, 5, 5]
        );
    }

    #[test]
    fn no_substrate_room() {
        let tech = presets::tech_n12().off_chip_mem;
        let err = size_main_memory(40.0, 30.0, 50.0, &tech, 815.0, 815.0).unwrap_err();
        assert_eq!(err.component, "DRAM");
    }

    fn net_tech() -> NetTech {
        NetTech {
            nominal_voltage: 0.8,
            nominal_frequency: 10e9,
            energy_per_link: 1e-12,
            area_per_link: 1.0,
            links_per_mm: 4.0,
            threshold_voltage: 0.3,
            min_voltage: 0.5,
            max_voltage: None,
            link_latency: 1e-7,
            bits_per_cycle: 1.0,
        }
    }

    #[test]
    fn link_min_rule_and_product() {
        let n = size_network(64.0, 100.0, 12.0, &net_tech(), NetLevel::Inter).unwrap();
        assert_eq!(n.num_links, 48);
        assert_eq!(n.bandwidth, 480e9);
    }

    #[test]
    fn zero_perimeter_is_an_error() {
        assert!(size_network(64.0, 100.0, 0.0, &net_tech(), NetLevel::Intra).is_err());
    }
}
