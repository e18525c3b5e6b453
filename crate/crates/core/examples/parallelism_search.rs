//! Time every parallelism strategy of the reference GEMM on eight nodes.
//!
//! `cargo run --release --example parallelism_search`

use crossflow::arch::generate;
use crossflow::perf::PredictOptions;
use crossflow::presets;
use crossflow::search::parallelism_search;

fn main() -> crossflow::Result<()> {
    let cfg = presets::reference_config();
    let arch = generate(&cfg.tech, &cfg.budgets, &cfg.arch_template)?;
    let r = parallelism_search(&arch, &cfg.system, &cfg.model, &PredictOptions::default())?;
    for o in &r.outcomes {
        match o.end_to_end_s {
            Some(t) => println!("{:<14} {:>10.4} ms", o.strategy.to_string(), t * 1e3),
            None => println!("{:<14} {:>10}  {}", o.strategy.to_string(), o.status, o.reason.as_deref().unwrap_or("")),
        }
    }
    if let Some((s, t)) = r.best {
        println!("best: {s} at {:.4} ms", t * 1e3);
    }
    Ok(())
}
