//! Expand a small MLP under RC-4-2-d3-p2 and summarize the supergraph.
//!
//! `cargo run --example supergraph_transform [out.dot]`

use std::collections::BTreeMap;

use crossflow::config::{MlpSpec, ParallelismStrategy};
use crossflow::graph::{export, transform, ComputeGraph, EdgeKind};

fn main() -> crossflow::Result<()> {
    let g = ComputeGraph::feed_forward(&MlpSpec { batch_size: 48, widths: vec![32, 32, 32, 32], backward: false }, 2)?;
    let s = ParallelismStrategy::rc(4, 2, 3, 2);
    let sg = transform(&g, &s)?;
    println!("{} kernels -> {} shards on {} devices", g.nodes.len(), sg.shards.len(), sg.devices().len());
    println!("layer stages: {:?}", sg.node_stage);
    let mut roles: BTreeMap<String, (usize, u64)> = BTreeMap::new();
    for e in &sg.edges {
        let key = match e.kind {
            EdgeKind::Local => "local".to_string(),
            EdgeKind::Cross(r) => format!("{r:?}"),
        };
        let entry = roles.entry(key).or_default();
        entry.0 += 1;
        entry.1 += e.bytes;
    }
    for (role, (n, bytes)) in roles {
        println!("{role:<20} {n:>5} edges {bytes:>9} bytes");
    }
    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, export::to_dot(&sg))?;
        println!("wrote {path}");
    }
    Ok(())
}
