//! Simulate a two-stage pipeline with four micro-batches and print its timeline.
//!
//! `cargo run --example pipeline_schedule`

use crossflow::perf::TaskGraph;

fn main() -> crossflow::Result<()> {
    let mut g = TaskGraph::new();
    let stages = [g.add_resource("stage0"), g.add_resource("stage1")];
    let link = g.add_resource("pipe0->1");
    for mb in 0..4 {
        let a = g.add_task(format!("fwd0.mb{mb}"), stages[0], 1.0, vec![]);
        let x = g.add_task(format!("send.mb{mb}"), link, 0.25, vec![a]);
        g.add_task(format!("fwd1.mb{mb}"), stages[1], 1.0, vec![x]);
    }
    let s = g.simulate()?;
    for e in &s.trace {
        println!("{:<9} {:<10} {:>5.2} -> {:>5.2}", e.resource, e.task, e.start, e.end);
    }
    println!("end to end: {} s", s.end_to_end);
    Ok(())
}
