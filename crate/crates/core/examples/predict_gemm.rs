//! Predict one large GEMM on the 8-node reference system under several strategies.
//!
//! `cargo run --release --example predict_gemm`

use crossflow::config::parse_strategy;
use crossflow::perf::{predict, PredictOptions};
use crossflow::presets;

fn main() -> crossflow::Result<()> {
    let cfg = presets::reference_config();
    let opts = PredictOptions::default();
    for s in ["RC-1-1-d1-p1", "RC-2-2-d2-p1", "RC-8-1-d1-p1", "CR-4-d2-p1", "CR-8-d1-p1"] {
        let p = predict(&cfg, &parse_strategy(s)?, &opts)?;
        let t = &p.timing;
        let slowest = t.per_kernel.iter().max_by(|a, b| a.time_s.total_cmp(&b.time_s)).unwrap();
        println!(
            "{s:<14} {:>10.3} ms  kernel {:>8.3} ms ({})  comm edges {:>3}  max link sharing {}",
            t.end_to_end_s * 1e3,
            slowest.time_s * 1e3,
            slowest.bound,
            t.per_edge.iter().map(|e| e.edges).sum::<u64>(),
            p.mapping.max_sharing
        );
    }
    Ok(())
}
