//! Predict one training iteration of the two-layer LSTM language model on a
//! 512-node system, for a few parallelism strategies.
//!
//! `cargo run --release --example lm_case_study [STRATEGY ...]`

use std::time::Instant;

use crossflow::arch::generate;
use crossflow::config::parse_strategy;
use crossflow::perf::{predict_on, PredictOptions};
use crossflow::presets;

fn main() -> crossflow::Result<()> {
    let cfg = presets::case_study_config();
    let arch = generate(&cfg.tech, &cfg.budgets, &cfg.arch_template)?;
    let mut strategies: Vec<String> = std::env::args().skip(1).collect();
    if strategies.is_empty() {
        strategies = ["RC-8-8-d8-p1", "RC-4-4-d32-p1", "CR-8-d64-p1", "RC-8-4-d8-p2"]
            .map(String::from)
            .to_vec();
    }
    println!("{:<16} {:>12} {:>10} {:>10}  bounds", "strategy", "iteration_s", "mem_GiB", "wall_ms");
    for s in &strategies {
        let strategy = parse_strategy(s)?;
        let t0 = Instant::now();
        match predict_on(&arch, &cfg.system, &cfg.model, &strategy, &PredictOptions::default()) {
            Ok(p) => println!(
                "{:<16} {:>12.4} {:>10.2} {:>10.1}  {:?}",
                s,
                p.timing.end_to_end_s,
                p.timing.memory_footprint_bytes / (1u64 << 30) as f64,
                t0.elapsed().as_secs_f64() * 1e3,
                p.timing.bound_histogram
            ),
            Err(e) => println!("{s:<16} infeasible: {e}"),
        }
    }
    Ok(())
}
