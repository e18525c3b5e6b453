//! Expansion of a compute graph under pipeline, data and kernel parallelism.
//!
//! Pipeline parallelism slices layers into contiguous stages. Data parallelism
//! splits the batch axis and joins weight shards in all-reduce rings. RC kernel
//! parallelism tiles each GEMM over a `kp1 x kp2` torus (rows of A, columns of B)
//! with all-gather rings along both torus axes; CR splits the reduction axis
//! over a ring of `kp1` shards whose partial outputs are all-reduced.

use serde::{Deserialize, Serialize};

use super::{ComputeGraph, Dims, NodeKind};
use crate::config::{KernelKind, ParallelismStrategy};
use crate::error::GraphError;

/// Size of slice `i` when `n` is split into `p` near-equal parts (larger parts first).
pub fn part(n: u64, p: u64, i: u64) -> u64 {
    n / p + u64::from(i < n % p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DeviceCoord {
    pub stage: u64,
    pub dp: u64,
    pub kp1: u64,
    pub kp2: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ShardId {
    pub node: usize,
    pub device: DeviceCoord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shard {
    pub id: ShardId,
    pub name: String,
    pub kind: NodeKind,
    pub layer: u64,
    pub dims: Dims,
    pub flops: u64,
    pub elementwise_flops: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossRole {
    /// One hop of a data-parallel gradient all-reduce ring.
    RingAllreduceStep,
    /// One hop of an RC operand all-gather ring.
    KpGatherStep,
    /// One hop of a CR partial-sum all-reduce ring.
    KpReduceStep,
    /// Activation or gradient passed between pipeline stages.
    PipelineActivation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "role")]
pub enum EdgeKind {
    Local,
    Cross(CrossRole),
}

/// The original graph element an edge was generated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeOrigin {
    Node(usize),
    Edge(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuperEdge {
    pub src: ShardId,
    pub dst: ShardId,
    pub bytes: u64,
    pub kind: EdgeKind,
    /// Sequential collective steps this hop takes part in (1 for plain transfers).
    pub steps: u64,
    pub origin: EdgeOrigin,
}

impl SuperEdge {
    pub fn is_cross(&self) -> bool {
        matches!(self.kind, EdgeKind::Cross(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperGraph {
    pub strategy: ParallelismStrategy,
    /// Ordered by node, then device coordinate.
    pub shards: Vec<Shard>,
    pub edges: Vec<SuperEdge>,
    /// Pipeline stage of each original node.
    pub node_stage: Vec<u64>,
    pub num_nodes: usize,
}

impl SuperGraph {
    pub fn cross_edges(&self) -> impl Iterator<Item = (usize, &SuperEdge)> {
        self.edges.iter().enumerate().filter(|(_, e)| e.is_cross())
    }

    /// Every device coordinate of the strategy, in lexicographic order.
    pub fn devices(&self) -> Vec<DeviceCoord> {
        all_devices(&self.strategy)
    }

    pub fn shards_of(&self, node: usize) -> impl Iterator<Item = &Shard> {
        self.shards.iter().filter(move |s| s.id.node == node)
    }
}

pub fn all_devices(s: &ParallelismStrategy) -> Vec<DeviceCoord> {
    let mut v = Vec::with_capacity(s.total_devices() as usize);
    for stage in 0..s.lp {
        for dp in 0..s.dp {
            for kp1 in 0..s.kp1 {
                for kp2 in 0..s.kp2 {
                    v.push(DeviceCoord { stage, dp, kp1, kp2 });
                }
            }
        }
    }
    v
}

/// Contiguous layer-to-stage assignment balancing cumulative forward flops.
pub fn stage_split(layer_flops: &[u64], lp: u64) -> Vec<u64> {
    let l = layer_flops.len() as u64;
    let total: u128 = layer_flops.iter().map(|&f| f as u128).sum();
    let mut prefix = vec![0u128; layer_flops.len() + 1];
    for (i, &f) in layer_flops.iter().enumerate() {
        prefix[i + 1] = prefix[i] + f as u128;
    }
    let mut bounds = Vec::with_capacity(lp as usize);
    let mut prev = 0u64;
    for s in 1..lp {
        let lo = prev + 1;
        let hi = l - (lp - s);
        // First layer whose prefix reaches s/lp of the total: prefix * lp >= s * total.
        let b = (lo..=hi)
            .find(|&b| prefix[b as usize] * lp as u128 >= s as u128 * total)
            .unwrap_or(hi);
        bounds.push(b);
        prev = b;
    }
    (0..l)
        .map(|layer| bounds.iter().filter(|&&b| b <= layer).count() as u64)
        .collect()
}

/// Sum of ring chunks `(r + 1) % p` and `(r + 2) % p`: the pieces a ring
/// participant never forwards in a reduce-scatter plus all-gather.
fn ring_hop_elems(tensor: u64, p: u64, r: u64) -> u64 {
    2 * tensor - part(tensor, p, (r + 1) % p) - part(tensor, p, (r + 2) % p)
}

pub fn transform(g: &ComputeGraph, s: &ParallelismStrategy) -> Result<SuperGraph, GraphError> {
    if s.kp1 == 0 || s.kp2 == 0 || s.dp == 0 || s.lp == 0 {
        return Err(GraphError::Infeasible("factors must be >= 1".into()));
    }
    if s.kind == KernelKind::CR && s.kp2 != 1 {
        return Err(GraphError::Infeasible("CR strategies have kp2 = 1".into()));
    }
    if s.lp > g.num_layers {
        return Err(GraphError::Infeasible(format!(
            "{} pipeline stages exceed {} layers",
            s.lp, g.num_layers
        )));
    }
    let mut layer_flops = vec![0u64; g.num_layers as usize];
    for n in g.nodes.iter().filter(|n| n.kind.is_forward()) {
        layer_flops[n.layer as usize] += n.flops;
    }
    let layer_stage = stage_split(&layer_flops, s.lp);
    let node_stage: Vec<u64> = g.nodes.iter().map(|n| layer_stage[n.layer as usize]).collect();

    // Shard dims: batch split first, then the kernel split.
    let mut replica_dims = Vec::with_capacity(g.nodes.len());
    for n in &g.nodes {
        let b = n.dims.get(n.batch_axis);
        if s.dp > b {
            return Err(GraphError::Infeasible(format!(
                "{}: dp={} exceeds batch extent {b}",
                n.name, s.dp
            )));
        }
        let per_dp: Vec<Dims> = (0..s.dp)
            .map(|d| {
                let mut dims = n.dims;
                dims.set(n.batch_axis, part(b, s.dp, d));
                dims
            })
            .collect();
        // Smallest replica bounds the kernel split.
        let small = per_dp[s.dp as usize - 1];
        match s.kind {
            KernelKind::RC => {
                if s.kp1 > small.m || s.kp2 > small.n {
                    return Err(GraphError::Infeasible(format!(
                        "{}: RC-{}-{} exceeds replica dims m={} n={}",
                        n.name, s.kp1, s.kp2, small.m, small.n
                    )));
                }
            }
            KernelKind::CR => {
                if s.kp1 > small.k {
                    return Err(GraphError::Infeasible(format!(
                        "{}: CR-{} exceeds replica dim k={}",
                        n.name, s.kp1, small.k
                    )));
                }
            }
        }
        replica_dims.push(per_dp);
    }
    let shard_dims = |node: usize, d: u64, i: u64, j: u64| -> Dims {
        let mut r = replica_dims[node][d as usize];
        match s.kind {
            KernelKind::RC => {
                r.m = part(r.m, s.kp1, i);
                r.n = part(r.n, s.kp2, j);
            }
            KernelKind::CR => r.k = part(r.k, s.kp1, i),
        }
        r
    };

    let mut shards = Vec::new();
    for n in &g.nodes {
        let stage = node_stage[n.id];
        for d in 0..s.dp {
            for i in 0..s.kp1 {
                for j in 0..s.kp2 {
                    let dims = shard_dims(n.id, d, i, j);
                    let flops = dims.gemm_flops().expect("shard flops bounded by node flops");
                    // Elementwise surcharge follows the share of GEMM work.
                    let extra = (n.elementwise_flops as u128 * flops as u128 / n.flops as u128) as u64;
                    shards.push(Shard {
                        id: ShardId { node: n.id, device: DeviceCoord { stage, dp: d, kp1: i, kp2: j } },
                        name: n.name.clone(),
                        kind: n.kind,
                        layer: n.layer,
                        flops,
                        elementwise_flops: extra,
                        dims,
                    });
                }
            }
        }
    }

    let prec = g.precision_bytes;
    let mut edges = Vec::new();
    let at = |node: usize, d: u64, i: u64, j: u64| ShardId {
        node,
        device: DeviceCoord { stage: node_stage[node], dp: d, kp1: i, kp2: j },
    };
    let kp_total = s.kp1 * s.kp2;

    // Data-flow edges, partitioned over the shards of each replica.
    for (ei, e) in g.edges.iter().enumerate() {
        let cross = node_stage[e.src] != node_stage[e.dst];
        let ways = s.dp * kp_total;
        for d in 0..s.dp {
            for i in 0..s.kp1 {
                for j in 0..s.kp2 {
                    let lin = (d * s.kp1 + i) * s.kp2 + j;
                    edges.push(SuperEdge {
                        src: at(e.src, d, i, j),
                        dst: at(e.dst, d, i, j),
                        bytes: part(e.bytes, ways, lin),
                        kind: if cross {
                            EdgeKind::Cross(CrossRole::PipelineActivation)
                        } else {
                            EdgeKind::Local
                        },
                        steps: 1,
                        origin: EdgeOrigin::Edge(ei),
                    });
                }
            }
        }
    }

    // Kernel-parallel collectives.
    for n in &g.nodes {
        for d in 0..s.dp {
            match s.kind {
                KernelKind::RC => {
                    for i in 0..s.kp1 {
                        for j in 0..s.kp2 {
                            let dims = shard_dims(n.id, d, i, j);
                            if s.kp2 > 1 {
                                // Row ring gathers A_i; the receiver already holds its own piece.
                                let a = dims.a_elems();
                                let nj = (j + 1) % s.kp2;
                                edges.push(SuperEdge {
                                    src: at(n.id, d, i, j),
                                    dst: at(n.id, d, i, nj),
                                    bytes: (a - part(a, s.kp2, nj)) * prec,
                                    kind: EdgeKind::Cross(CrossRole::KpGatherStep),
                                    steps: s.kp2 - 1,
                                    origin: EdgeOrigin::Node(n.id),
                                });
                            }
                            if s.kp1 > 1 {
                                let b = dims.b_elems();
                                let ni = (i + 1) % s.kp1;
                                edges.push(SuperEdge {
                                    src: at(n.id, d, i, j),
                                    dst: at(n.id, d, ni, j),
                                    bytes: (b - part(b, s.kp1, ni)) * prec,
                                    kind: EdgeKind::Cross(CrossRole::KpGatherStep),
                                    steps: s.kp1 - 1,
                                    origin: EdgeOrigin::Node(n.id),
                                });
                            }
                        }
                    }
                }
                KernelKind::CR => {
                    if s.kp1 > 1 {
                        let c = replica_dims[n.id][d as usize].c_elems();
                        for i in 0..s.kp1 {
                            edges.push(SuperEdge {
                                src: at(n.id, d, i, 0),
                                dst: at(n.id, d, (i + 1) % s.kp1, 0),
                                bytes: ring_hop_elems(c, s.kp1, i) * prec,
                                kind: EdgeKind::Cross(CrossRole::KpReduceStep),
                                steps: 2 * (s.kp1 - 1),
                                origin: EdgeOrigin::Node(n.id),
                            });
                        }
                    }
                }
            }
        }
    }

    // Data-parallel gradient rings over weight shards.
    if s.dp > 1 {
        for w in g.weight_nodes() {
            let elems = g.nodes[w].weight_elems();
            for i in 0..s.kp1 {
                for j in 0..s.kp2 {
                    let t = part(elems, kp_total, i * s.kp2 + j);
                    for d in 0..s.dp {
                        edges.push(SuperEdge {
                            src: at(w, d, i, j),
                            dst: at(w, (d + 1) % s.dp, i, j),
                            bytes: ring_hop_elems(t, s.dp, d) * prec,
                            kind: EdgeKind::Cross(CrossRole::RingAllreduceStep),
                            steps: 2 * (s.dp - 1),
                            origin: EdgeOrigin::Node(w),
                        });
                    }
                }
            }
        }
    }

    Ok(SuperGraph {
        strategy: *s,
        shards,
        edges,
        node_stage,
        num_nodes: g.nodes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::MlpSpec;
    use std::collections::BTreeSet;

    fn figure_graph() -> ComputeGraph {
        ComputeGraph::feed_forward(
            &MlpSpec { batch_size: 48, widths: vec![32, 32, 32, 32], backward: false },
            2,
        )
        .unwrap()
    }

    #[test]
    fn part_is_balanced() {
        assert_eq!((0..3).map(|i| part(10, 3, i)).collect::<Vec<_>>(), vec![4, 3, 3]);
        assert_eq!((0..4).map(|i| part(10, 4, i)).sum::<u64>(), 10);
    }

    #[test]
    fn figure_instance_counts() {
        let sg = transform(&figure_graph(), &ParallelismStrategy::rc(4, 2, 3, 2)).unwrap();
        assert_eq!(sg.shards.len(), 72);
        let devs: BTreeSet<_> = sg.shards.iter().map(|s| s.id.device).collect();
        assert_eq!(devs.len(), 24 * 2);
    }

    #[test]
    fn identity_strategy_is_isomorphic() {
        let g = figure_graph();
        let sg = transform(&g, &ParallelismStrategy::identity()).unwrap();
        assert_eq!(sg.shards.len(), g.nodes.len());
        assert_eq!(sg.edges.len(), g.edges.len());
        assert_eq!(sg.cross_edges().count(), 0);
    }

    #[test]
    fn dp_ring_has_two_edges_per_shard() {
        let g = figure_graph();
        let sg = transform(&g, &ParallelismStrategy::rc(1, 1, 3, 1)).unwrap();
        for w in g.weight_nodes() {
            let shard_edges: Vec<_> = sg
                .edges
                .iter()
                .filter(|e| e.kind == EdgeKind::Cross(CrossRole::RingAllreduceStep))
                .filter(|e| e.src.node == w)
                .collect();
            assert_eq!(shard_edges.len(), 3);
            for d in 0..3 {
                let touching = shard_edges
                    .iter()
                    .filter(|e| e.src.device.dp == d || e.dst.device.dp == d)
                    .count();
                assert_eq!(touching, 2);
            }
            assert!(shard_edges.iter().all(|e| e.steps == 4));
        }
    }

    #[test]
    fn ring_volume_matches_collective_formula() {
        // Each participant sends 2 (p - 1) / p of the tensor.
        for p in 2..7u64 {
            for t in [p, 3 * p, 100 * p] {
                for r in 0..p {
                    assert_eq!(ring_hop_elems(t, p, r), 2 * (p - 1) * t / p);
                }
            }
        }
    }

    #[test]
    fn flops_conserved() {
        let g = figure_graph();
        for s in [
            ParallelismStrategy::rc(4, 2, 3, 2),
            ParallelismStrategy::cr(5, 3, 3),
            ParallelismStrategy::rc(3, 5, 7, 1),
        ] {
            let sg = transform(&g, &s).unwrap();
            let total: u64 = sg.shards.iter().map(|s| s.flops).sum();
            assert_eq!(total, g.total_flops());
        }
    }

    #[test]
    fn infeasible_sharding() {
        let g = ComputeGraph::gemm(4, 4, 4, 2).unwrap();
        assert!(transform(&g, &ParallelismStrategy::rc(8, 1, 1, 1)).is_err());
        assert!(transform(&g, &ParallelismStrategy::cr(5, 1, 1)).is_err());
        assert!(transform(&g, &ParallelismStrategy::rc(1, 1, 1, 2)).is_err());
        assert!(transform(&g, &ParallelismStrategy::rc(1, 1, 5, 1)).is_err());
    }

    #[test]
    fn stage_split_balances_prefix() {
        assert_eq!(stage_split(&[1, 1, 1], 2), vec![0, 0, 1]);
        assert_eq!(stage_split(&[10, 1, 1, 1], 2), vec![0, 1, 1, 1]);
        assert_eq!(stage_split(&[1, 1, 1, 10], 3), vec![0, 0, 1, 2]);
        assert_eq!(stage_split(&[5, 5], 1), vec![0, 0]);
    }

    #[test]
    fn cross_edges_join_distinct_devices() {
        let sg = transform(&figure_graph(), &ParallelismStrategy::rc(4, 2, 3, 2)).unwrap();
        for (_, e) in sg.cross_edges() {
            assert_ne!(e.src.device, e.dst.device);
        }
        for e in sg.edges.iter().filter(|e| !e.is_cross()) {
            assert_eq!(e.src.device, e.dst.device);
        }
    }
}
