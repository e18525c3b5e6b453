//! Place a 48-device supergraph onto a 6x8 mesh and score all 24 axis orderings.
//!
//! `cargo run --example device_mapping`

use crossflow::config::{MlpSpec, ParallelismStrategy, SystemGraph};
use crossflow::graph::{transform, ComputeGraph};
use crossflow::mapping::map_devices;

fn main() -> crossflow::Result<()> {
    let g = ComputeGraph::feed_forward(&MlpSpec { batch_size: 48, widths: vec![32, 32, 32, 32], backward: true }, 2)?;
    let sg = transform(&g, &ParallelismStrategy::rc(4, 2, 3, 2))?;
    let sys = SystemGraph::mesh2d(6, 8, 1, 1);
    let m = map_devices(&sg, &sys)?;
    for (i, c) in m.candidates.iter().enumerate() {
        let dup = c.duplicate_of.map(|d| format!(" (same layout as #{d})")).unwrap_or_default();
        println!("#{i:<2} {:?}: max sharing {:>3}, hops {:>5}{dup}", c.order, c.max_sharing, c.total_hops);
    }
    println!("chosen #{} {:?}", m.chosen_index, m.chosen_order);
    println!("sharing histogram (edges per link -> links): {:?}", m.sharing_histogram());
    Ok(())
}
