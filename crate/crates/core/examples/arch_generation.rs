//! Size an accelerator node from a technology library and a budget split.
//!
//! `cargo run --example arch_generation [reference|case_study]`

use crossflow::arch::generate;
use crossflow::presets;

fn main() -> crossflow::Result<()> {
    let which = std::env::args().nth(1).unwrap_or_else(|| "reference".into());
    let cfg = match which.as_str() {
        "case_study" => presets::case_study_config(),
        _ => presets::reference_config(),
    };
    let arch = generate(&cfg.tech, &cfg.budgets, &cfg.arch_template)?;

    println!("tech node: {}", arch.tech_node);
    println!(
        "compute: {} units at {:.3} V / {:.3} GHz -> {:.1} Tflop/s ({} MCUs)",
        arch.core.operating_point.unit_count,
        arch.core.operating_point.voltage,
        arch.core.operating_point.frequency / 1e9,
        arch.compute_throughput / 1e12,
        arch.mcu_count()
    );
    for l in &arch.mem_levels {
        println!(
            "{:>4}: {:>12.3} MiB total, {:>4} instances x {:>6} banks, {:>10.2} TB/s",
            l.name,
            l.capacity / 8.0 / (1 << 20) as f64,
            l.instances,
            l.num_banks / l.instances,
            l.bandwidth / 8e12
        );
    }
    let mm = &arch.main_mem;
    println!(
        "main: {} devices (limits area/power/perimeter {:?}), {:.1} GiB, {:.2} TB/s",
        mm.num_devices,
        mm.device_limits,
        mm.capacity / 8.0 / (1u64 << 30) as f64,
        mm.bandwidth / 8e12
    );
    for n in [&arch.net_intra, &arch.net_inter] {
        println!(
            "{:?}: {} links x {:.1} Gb/s = {:.1} GB/s",
            n.level,
            n.num_links,
            n.link_bandwidth / 1e9,
            n.bandwidth / 8e9
        );
    }
    println!("\nbudget audit (used / allocated):");
    for r in &arch.audit.rows {
        println!(
            "  {:<10} area {:>8.2}/{:>8.2} mm2  power {:>7.2}/{:>7.2} W  perimeter {:>6.2}/{:>6.2} mm",
            r.component.to_string(),
            r.area_used,
            r.area_alloc,
            r.power_used,
            r.power_alloc,
            r.perimeter_used,
            r.perimeter_alloc
        );
    }
    for n in &arch.notes {
        println!("note: {n}");
    }
    Ok(())
}
