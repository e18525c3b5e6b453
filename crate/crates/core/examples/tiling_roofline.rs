//! Tile a GEMM through the reference memory hierarchy and print its roofline.
//!
//! `cargo run --release --example tiling_roofline [M N K]`

use crossflow::arch::generate;
use crossflow::graph::Dims;
use crossflow::perf::search_tilings;
use crossflow::presets;

fn main() -> crossflow::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let d = match args[..] {
        [m, n, k] => Dims::new(m, n, k),
        _ => Dims::new(8192, 8192, 256),
    };
    let cfg = presets::reference_config();
    let arch = generate(&cfg.tech, &cfg.budgets, &cfg.arch_template)?;
    let r = search_tilings(&d, 0, 2, &arch, 50, 0)?;
    println!("GEMM {}x{}x{}: {:?} dataflow, {} candidates", d.m, d.n, d.k, r.dataflow, r.candidates_evaluated);
    for (level, t) in arch.mem_levels.iter().skip(1).zip(&r.tiles) {
        println!("  {} tile {:?}", level.name, t);
    }
    let p = &r.profile;
    println!("  compute {:>12.3e} s", p.compute_time);
    for l in &p.levels {
        let oi = l.oi.map(|x| format!("{x:.2} flop/B")).unwrap_or_else(|| "-".into());
        println!("  {:<7} {:>12.3e} s  {:>14} B  OI {oi}", l.level, l.time, l.bytes);
    }
    println!("  kernel  {:>12.3e} s, bound by {}", p.kernel_time, p.bound);
    Ok(())
}
