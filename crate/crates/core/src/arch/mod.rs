//! Architecture generation: technology plus budgets in, concrete hardware parameters out.

pub mod sizing;
pub mod vf;

use serde::{Deserialize, Serialize};

pub use sizing::{
    cache_area, cache_bandwidth, cache_static_power, core_throughput, device_limits,
    size_cache_level, size_cores, size_main_memory, size_network, units_in_area, CoreSpec,
    MainMemSpec, MemLevelSpec, NetLevel, NetSpec,
};
pub use vf::{scale_vf, OperatingPoint, VfModel};

use crate::config::{ArchTemplate, Component, Dataflow, ResourceBudget, Scope, TechLibrary};
use crate::error::SizingError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McuSpec {
    pub array_x: u64,
    pub array_y: u64,
    pub dataflow: Dataflow,
    pub max_utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub component: Component,
    pub area_alloc: f64,
    pub area_used: f64,
    pub power_alloc: f64,
    pub power_used: f64,
    pub perimeter_alloc: f64,
    pub perimeter_used: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetAudit {
    pub rows: Vec<AuditRow>,
    pub area_budget: f64,
    pub power_budget: f64,
    pub perimeter_budget: f64,
}

impl BudgetAudit {
    pub fn totals(&self) -> (f64, f64, f64) {
        self.rows.iter().fold((0.0, 0.0, 0.0), |(a, p, r), row| {
            (a + row.area_used, p + row.power_used, r + row.perimeter_used)
        })
    }

    /// Every component within its allocation and the totals within the budgets.
    pub fn holds(&self, rel_slack: f64) -> bool {
        let within = |used: f64, alloc: f64| used <= alloc * (1.0 + rel_slack) + 1e-300;
        let (a, p, r) = self.totals();
        self.rows.iter().all(|row| {
            within(row.area_used, row.area_alloc)
                && within(row.power_used, row.power_alloc)
                && within(row.perimeter_used, row.perimeter_alloc)
        }) && within(a, self.area_budget)
            && within(p, self.power_budget)
            && within(r, self.perimeter_budget)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub tech_node: String,
    /// Raw flops/s; utilization derating happens at kernel timing.
    pub compute_throughput: f64,
    pub core: CoreSpec,
    pub mcu: McuSpec,
    /// Registers (`L0`) first.
    pub mem_levels: Vec<MemLevelSpec>,
    pub main_mem: MainMemSpec,
    pub net_intra: NetSpec,
    pub net_inter: NetSpec,
    pub audit: BudgetAudit,
    pub notes: Vec<String>,
}

impl ArchSpec {
    pub fn mcu_count(&self) -> u64 {
        self.core.operating_point.unit_count
    }

    pub fn effective_throughput(&self) -> f64 {
        self.compute_throughput * self.mcu.max_utilization
    }

    pub fn main_mem_bytes(&self) -> f64 {
        self.main_mem.capacity / 8.0
    }
}

fn instances_for(scope: Scope, mcus: u64, per_bundle: u64) -> u64 {
    match scope {
        Scope::Mcu => mcus,
        Scope::Bundle => mcus.div_ceil(per_bundle),
        Scope::Global => 1,
    }
}

/// Size every component of the template within its budget share.
pub fn generate(
    tech: &TechLibrary,
    budget: &ResourceBudget,
    template: &ArchTemplate,
) -> Result<ArchSpec, SizingError> {
    let mut notes = Vec::new();
    let (p_unit, derived) = tech.compute_nominal_power();
    if derived {
        notes.push(format!(
            "compute nominal_power derived from default_power_density: {p_unit} W per unit"
        ));
    }
    let core = size_cores(
        budget.area(Component::Core),
        budget.power(Component::Core),
        &tech.compute,
        p_unit,
    )?;
    if core.operating_point.unit_count < core.units_by_area {
        notes.push(format!(
            "core: power budget reduced units from {} to {}",
            core.units_by_area, core.operating_point.unit_count
        ));
    }
    let mcus = core.operating_point.unit_count;

    let mut levels: Vec<MemLevelSpec> = Vec::with_capacity(template.mem_levels.len());
    for (i, lt) in template.mem_levels.iter().enumerate() {
        let mtech = tech.on_chip_mem.get(&lt.name).ok_or_else(|| {
            SizingError::new(&lt.name, "no technology entry under on_chip_mem")
        })?;
        let instances = instances_for(lt.scope, mcus, template.mcus_per_bundle);
        let below = if i == 0 { mcus } else { levels[i - 1].instances };
        let fanout = below.div_ceil(instances);
        let c = Component::Cache(i as u8);
        let spec = size_cache_level(
            &lt.name,
            lt.scope,
            budget.area(c),
            budget.power(c),
            mtech,
            fanout,
            instances,
        )?;
        levels.push(spec);
    }

    let main_mem = size_main_memory(
        budget.area(Component::Dram),
        budget.power(Component::Dram),
        budget.perimeter(Component::Dram),
        &tech.off_chip_mem,
        budget.node_area_budget,
        budget.proc_chip_area_budget,
    )?;

    for (i, w) in levels.windows(2).enumerate() {
        if w[1].capacity <= w[0].capacity {
            return Err(SizingError::new(
                &w[1].name,
                format!(
                    "capacity {} bits does not exceed level L{i} ({} bits)",
                    w[1].capacity, w[0].capacity
                ),
            ));
        }
    }
    if let Some(last) = levels.last() {
        if main_mem.capacity <= last.capacity {
            return Err(SizingError::new(
                "DRAM",
                "main memory capacity does not exceed the last cache level",
            ));
        }
    }

    let net_intra = size_network(
        budget.area(Component::NetIntra),
        budget.power(Component::NetIntra),
        budget.perimeter(Component::NetIntra),
        &tech.network.intra_node,
        NetLevel::Intra,
    )?;
    let net_inter = size_network(
        budget.area(Component::NetInter),
        budget.power(Component::NetInter),
        budget.perimeter(Component::NetInter),
        &tech.network.inter_node,
        NetLevel::Inter,
    )?;

    let row = |c: Component, area: f64, power: f64, perim: f64| AuditRow {
        component: c,
        area_alloc: budget.area(c),
        area_used: area,
        power_alloc: budget.power(c),
        power_used: power,
        perimeter_alloc: budget.perimeter(c),
        perimeter_used: perim,
    };
    let mut rows = vec![row(
        Component::Core,
        core.area_used,
        core.operating_point.total_power(),
        0.0,
    )];
    for (i, l) in levels.iter().enumerate() {
        rows.push(row(Component::Cache(i as u8), l.area_used, l.power_used, 0.0));
    }
    rows.push(row(
        Component::Dram,
        main_mem.area_used,
        main_mem.power_used,
        main_mem.perimeter_used,
    ));
    for n in [&net_intra, &net_inter] {
        let c = match n.level {
            NetLevel::Intra => Component::NetIntra,
            NetLevel::Inter => Component::NetInter,
        };
        rows.push(row(c, n.area_used, n.power_used, n.perimeter_used));
    }

    let max_utilization = template
        .mcu
        .max_utilization
        .unwrap_or(tech.compute.max_utilization);
    Ok(ArchSpec {
        tech_node: tech.compute.tech_node.clone(),
        compute_throughput: core.throughput,
        core,
        mcu: McuSpec {
            array_x: template.mcu.array_x,
            array_y: template.mcu.array_y,
            dataflow: template.mcu.dataflow,
            max_utilization,
        },
        mem_levels: levels,
        main_mem,
        net_intra,
        net_inter,
        audit: BudgetAudit {
            rows,
            area_budget: budget.proc_chip_area_budget,
            power_budget: budget.power_budget,
            perimeter_budget: budget.perimeter_budget,
        },
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn reference_generates_within_budget() {
        let c = presets::reference_config();
        let a = generate(&c.tech, &c.budgets, &c.arch_template).unwrap();
        assert!(a.audit.holds(1e-9), "{:#?}", a.audit);
        assert_eq!(a.mem_levels.len(), 3);
        assert_eq!(a.main_mem.num_devices, 4);
        assert!(a.compute_throughput > 0.0);
    }

    #[test]
    fn zero_core_fraction_names_core() {
        let c = presets::reference_config();
        let mut b = c.budgets.clone();
        b.area_frac.insert(Component::Core, 0.0);
        let e = generate(&c.tech, &b, &c.arch_template).unwrap_err();
        assert_eq!(e.component, "core");
    }

    #[test]
    fn missing_level_technology() {
        let c = presets::reference_config();
        let mut t = c.tech.clone();
        t.on_chip_mem.remove("L1");
        let e = generate(&t, &c.budgets, &c.arch_template).unwrap_err();
        assert_eq!(e.component, "L1");
    }

    #[test]
    fn derived_nominal_power_is_flagged() {
        let c = presets::reference_config();
        let mut t = c.tech.clone();
        t.compute.nominal_power = None;
        t.default_power_density = Some(0.35 / 0.4);
        let a = generate(&t, &c.budgets, &c.arch_template).unwrap();
        assert!(a.notes.iter().any(|n| n.contains("default_power_density")));
    }
}
