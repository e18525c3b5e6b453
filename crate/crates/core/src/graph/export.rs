//! DOT and JSON renderings of supergraphs.

use std::fmt::Write;

use super::transform::{EdgeKind, ShardId, SuperGraph};

fn shard_label(id: &ShardId) -> String {
    let d = id.device;
    format!("n{}_p{}_d{}_k{}_{}", id.node, d.stage, d.dp, d.kp1, d.kp2)
}

/// Graphviz rendering; cross edges are drawn red.
pub fn to_dot(sg: &SuperGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph supergraph {{");
    let _ = writeln!(out, "  label=\"{}\";", sg.strategy);
    for s in &sg.shards {
        let _ = writeln!(
            out,
            "  {} [label=\"{}\\n({},{},{})\"];",
            shard_label(&s.id),
            s.name,
            s.dims.m,
            s.dims.n,
            s.dims.k
        );
    }
    for e in &sg.edges {
        let style = match e.kind {
            EdgeKind::Local => String::new(),
            EdgeKind::Cross(r) => format!(" color=red label=\"{r:?} {}B\"", e.bytes),
        };
        let _ = writeln!(
            out,
            "  {} -> {} [{}];",
            shard_label(&e.src),
            shard_label(&e.dst),
            style.trim_start()
        );
    }
    out.push_str("}\n");
    out
}

pub fn to_json(sg: &SuperGraph) -> String {
    serde_json::to_string_pretty(sg).expect("supergraph serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ParallelismStrategy;
    use crate::graph::{transform, ComputeGraph};

    #[test]
    fn dot_lists_every_shard_and_edge() {
        let g = ComputeGraph::gemm(16, 16, 16, 2).unwrap();
        let sg = transform(&g, &ParallelismStrategy::rc(2, 2, 2, 1)).unwrap();
        let dot = to_dot(&sg);
        assert_eq!(dot.matches("[label=").count(), sg.shards.len());
        assert_eq!(dot.matches(" -> ").count(), sg.edges.len());
        assert!(dot.contains("color=red"));
        let v: serde_json::Value = serde_json::from_str(&to_json(&sg)).unwrap();
        assert_eq!(v["shards"].as_array().unwrap().len(), 8);
    }
}
