//! Descend over area, power and perimeter fractions for a fixed strategy.
//!
//! `cargo run --release --example hardware_search [restarts] [steps]`

use crossflow::config::parse_strategy;
use crossflow::perf::PredictOptions;
use crossflow::presets;
use crossflow::search::{search_arch, SearchConfig};

fn main() -> crossflow::Result<()> {
    let mut args = std::env::args().skip(1).filter_map(|a| a.parse::<usize>().ok());
    let scfg = SearchConfig {
        restarts: args.next().unwrap_or(3),
        steps: args.next().unwrap_or(10),
        ..Default::default()
    };
    let cfg = presets::reference_config();
    let r = search_arch(&cfg, &parse_strategy("RC-2-2-d2-p1")?, &scfg, &PredictOptions::default())?;
    println!("baseline {:.4} ms, best {:.4} ms, speedup {:.3}x", r.baseline.end_to_end_s * 1e3, r.best.end_to_end_s * 1e3, r.speedup);
    let h = r.components.len();
    for (g, name) in ["area", "power", "perimeter"].iter().enumerate() {
        println!("{name}:");
        for (i, c) in r.components.iter().enumerate() {
            println!("  {c:<10} {:.3} -> {:.3}", r.baseline.w[g * h + i], r.best.w[g * h + i]);
        }
    }
    println!("budget audit holds: {}", r.audit_holds);
    Ok(())
}
