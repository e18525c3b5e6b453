//! Placement of device coordinates onto system nodes and routing of cross edges.
//!
//! For each of the 24 orderings of the parallel axes, device coordinates are
//! laid onto the system dimensions greedily (see [`Layout`]). Cross edges are routed dimension-ordered and the ordering
//! with the lowest worst-case link sharing wins (then fewest total hops, then
//! lowest ordering index).

pub mod route;

use std::collections::{BTreeMap, HashMap};

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use route::{link_endpoints, route, route_in, Link};

use crate::arch::ArchSpec;
use crate::config::{ParallelismStrategy, SystemGraph};
use crate::error::MappingError;
use crate::graph::{DeviceCoord, SuperGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParallelAxis {
    Kp1,
    Kp2,
    Lp,
    Dp,
}

impl ParallelAxis {
    fn extent(self, s: &ParallelismStrategy) -> u64 {
        match self {
            ParallelAxis::Kp1 => s.kp1,
            ParallelAxis::Kp2 => s.kp2,
            ParallelAxis::Lp => s.lp,
            ParallelAxis::Dp => s.dp,
        }
    }

    fn coord(self, d: &DeviceCoord) -> u64 {
        match self {
            ParallelAxis::Kp1 => d.kp1,
            ParallelAxis::Kp2 => d.kp2,
            ParallelAxis::Lp => d.stage,
            ParallelAxis::Dp => d.dp,
        }
    }
}

pub type AxisOrder = [ParallelAxis; 4];

/// All 24 orderings; index 0 is (kernel row, kernel column, pipeline, data).
pub fn all_orders() -> Vec<AxisOrder> {
    [ParallelAxis::Kp1, ParallelAxis::Kp2, ParallelAxis::Lp, ParallelAxis::Dp]
        .into_iter()
        .permutations(4)
        .map(|p| [p[0], p[1], p[2], p[3]])
        .collect()
}

/// Where one parallel axis lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisPlacement {
    /// Coordinate `c` contributes `c * stride`.
    Stride(u64),
    /// A ring folded into a U over two dimensions: out along the first for
    /// `half` steps, back along the second.
    Fold { extent: u64, half: u64, stride_out: u64, stride_back: u64 },
}

impl AxisPlacement {
    fn offset(self, c: u64) -> u64 {
        match self {
            AxisPlacement::Stride(st) => c * st,
            AxisPlacement::Fold { extent, half, stride_out, stride_back } => {
                if c < half {
                    c * stride_out
                } else {
                    (extent - 1 - c) * stride_out + stride_back
                }
            }
        }
    }
}

/// Placement of device coordinates for one axis ordering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub order: AxisOrder,
    /// Summed offsets give a node id, or a position along the snake when `snake` is set.
    pub axes: [AxisPlacement; 4],
    /// System dimensions walked boustrophedon style, lowest dimension fastest.
    pub snake: Option<Vec<u64>>,
}

impl Layout {
    /// Greedy layout over the system's dimensions (package dims after node dims).
    ///
    /// Axes are taken in `order`. Each fills the current dimension while it
    /// fits and wraps to the next dimension when it does not. An axis too long
    /// for a fresh dimension is folded over it and the next one. If some
    /// axis still does not fit, devices are numbered with the first axis
    /// fastest and laid along a snake through the system, so consecutive
    /// numbers always land on neighbouring nodes.
    pub fn new(order: AxisOrder, s: &ParallelismStrategy, sys: &SystemGraph) -> Self {
        let radix: Vec<u64> = sys.intra.dims.iter().chain(&sys.inter.dims).copied().collect();
        match pack(&order, s, &radix) {
            Some(axes) => Self { order, axes, snake: None },
            None => Self { order, axes: linear(&order, s), snake: Some(radix) },
        }
    }

    pub fn node(&self, d: &DeviceCoord) -> u64 {
        let pos = self.order.iter().zip(&self.axes).map(|(ax, p)| p.offset(ax.coord(d))).sum();
        match &self.snake {
            None => pos,
            Some(radix) => snake_node(radix, pos),
        }
    }
}

/// Node id of position `pos` on the boustrophedon walk over `radix`.
fn snake_node(radix: &[u64], pos: u64) -> u64 {
    let Some((_, rest)) = radix.split_last() else { return 0 };
    let block: u64 = rest.iter().product();
    let digit = pos / block;
    let mut inner = pos % block;
    if digit % 2 == 1 {
        inner = block - 1 - inner;
    }
    digit * block + snake_node(rest, inner)
}

fn linear(order: &AxisOrder, s: &ParallelismStrategy) -> [AxisPlacement; 4] {
    let mut axes = [AxisPlacement::Stride(0); 4];
    let mut acc = 1;
    for (i, ax) in order.iter().enumerate() {
        axes[i] = AxisPlacement::Stride(acc);
        acc *= ax.extent(s);
    }
    axes
}

fn pack(order: &AxisOrder, s: &ParallelismStrategy, radix: &[u64]) -> Option<[AxisPlacement; 4]> {
    let mut axes = [AxisPlacement::Stride(0); 4];
    let mut used = vec![1u64; radix.len()];
    let mut dim = 0;
    let base = |d: usize| radix[..d].iter().product::<u64>();
    for (i, ax) in order.iter().enumerate() {
        let e = ax.extent(s);
        if e == 1 {
            continue;
        }
        let half = e.div_ceil(2);
        let fold_at = |d: usize| {
            d + 1 < radix.len() && used[d] == 1 && used[d + 1] == 1 && half <= radix[d] && radix[d + 1] >= 2
        };
        let d = (dim..radix.len()).find(|&d| used[d] * e <= radix[d] || fold_at(d))?;
        if used[d] * e <= radix[d] {
            axes[i] = AxisPlacement::Stride(base(d) * used[d]);
            used[d] *= e;
            dim = d;
        } else {
            axes[i] = AxisPlacement::Fold { extent: e, half, stride_out: base(d), stride_back: base(d + 1) };
            used[d] = radix[d];
            used[d + 1] = 2;
            dim = d + 1;
        }
    }
    Some(axes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    pub intra_bandwidth: f64,
    pub intra_latency: f64,
    pub inter_bandwidth: f64,
    pub inter_latency: f64,
}

impl LinkModel {
    /// Explicit system values win; otherwise each node's aggregate link
    /// bandwidth is split over its topology ports. A package pools the
    /// inter-package interfaces of all its nodes.
    pub fn resolve(sys: &SystemGraph, arch: &ArchSpec) -> Self {
        let intra_bw = sys
            .intra
            .link_bandwidth
            .unwrap_or(arch.net_intra.bandwidth / sys.intra.ports() as f64);
        let inter_bw = sys.inter.link_bandwidth.unwrap_or(
            arch.net_inter.bandwidth * sys.nodes_per_package as f64 / sys.inter.ports() as f64,
        );
        LinkModel {
            intra_bandwidth: intra_bw,
            intra_latency: sys.intra.link_latency.unwrap_or(arch.net_intra.latency),
            inter_bandwidth: inter_bw,
            inter_latency: sys.inter.link_latency.unwrap_or(arch.net_inter.latency),
        }
    }

    pub fn uniform(bandwidth: f64, latency: f64) -> Self {
        LinkModel {
            intra_bandwidth: bandwidth,
            intra_latency: latency,
            inter_bandwidth: bandwidth,
            inter_latency: latency,
        }
    }

    pub fn bandwidth(&self, l: &Link) -> f64 {
        if l.is_inter() {
            self.inter_bandwidth
        } else {
            self.intra_bandwidth
        }
    }

    pub fn latency(&self, l: &Link) -> f64 {
        if l.is_inter() {
            self.inter_latency
        } else {
            self.intra_latency
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub device: DeviceCoord,
    pub node: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRoute {
    /// Index into the supergraph's edge list.
    pub edge: usize,
    pub src_node: u64,
    pub dst_node: u64,
    pub links: Vec<Link>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkLoad {
    pub link: Link,
    pub edges: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub order: AxisOrder,
    pub max_sharing: u64,
    pub total_hops: u64,
    /// Earlier ordering producing the same layout.
    pub duplicate_of: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mapping {
    pub chosen_order: AxisOrder,
    pub chosen_index: usize,
    pub placements: Vec<Placement>,
    pub edge_routes: Vec<EdgeRoute>,
    pub link_sharing: Vec<LinkLoad>,
    pub max_sharing: u64,
    pub total_hops: u64,
    pub candidates: Vec<CandidateScore>,
}

impl Mapping {
    pub fn sharing_map(&self) -> BTreeMap<Link, u64> {
        self.link_sharing.iter().map(|l| (l.link, l.edges)).collect()
    }

    pub fn node_of(&self, d: &DeviceCoord) -> Option<u64> {
        self.placements
            .binary_search_by(|p| p.device.cmp(d))
            .ok()
            .map(|i| self.placements[i].node)
    }

    /// Histogram: sharing level to number of links at that level.
    pub fn sharing_histogram(&self) -> BTreeMap<u64, u64> {
        let mut h = BTreeMap::new();
        for l in &self.link_sharing {
            *h.entry(l.edges).or_insert(0) += 1;
        }
        h
    }

    /// Per routed edge: minimum over its links of bandwidth divided by sharing.
    pub fn effective_bandwidth(&self, links: &LinkModel) -> Vec<f64> {
        let share = self.sharing_map();
        self.edge_routes
            .iter()
            .map(|r| {
                r.links
                    .iter()
                    .map(|l| links.bandwidth(l) / share[l] as f64)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mapping serializes")
    }
}

/// Score one layout: (max sharing, total hops).
fn score(
    sg: &SuperGraph,
    sys: &SystemGraph,
    node_of: &dyn Fn(&DeviceCoord) -> u64,
) -> Result<(u64, u64), MappingError> {
    let mut share: HashMap<Link, u64> = HashMap::new();
    let mut cache: HashMap<(u64, u64), Vec<Link>> = HashMap::new();
    let mut hops = 0u64;
    for (_, e) in sg.cross_edges() {
        let key = (node_of(&e.src.device), node_of(&e.dst.device));
        if !cache.contains_key(&key) {
            cache.insert(key, route(key.0, key.1, sys)?);
        }
        let r = &cache[&key];
        hops += r.len() as u64;
        for l in r {
            *share.entry(*l).or_insert(0) += 1;
        }
    }
    Ok((share.values().copied().max().unwrap_or(0), hops))
}

/// Best-of-24 greedy placement.
pub fn map_devices(sg: &SuperGraph, sys: &SystemGraph) -> Result<Mapping, MappingError> {
    let s = sg.strategy;
    let devices = sg.devices();
    let available = sys.total_nodes();
    if s.total_devices() > available {
        return Err(MappingError::InsufficientNodes {
            needed: s.total_devices(),
            available,
        });
    }
    let orders = all_orders();
    let plans: Vec<Layout> = orders.iter().map(|o| Layout::new(*o, &s, sys)).collect();
    let layouts: Vec<Vec<u64>> = plans
        .iter()
        .map(|l| devices.iter().map(|d| l.node(d)).collect())
        .collect();
    let duplicate_of: Vec<Option<usize>> = (0..orders.len())
        .map(|i| (0..i).find(|&j| layouts[j] == layouts[i]))
        .collect();

    let unique: Vec<usize> = (0..orders.len()).filter(|&i| duplicate_of[i].is_none()).collect();
    let scored: Vec<(usize, (u64, u64))> = unique
        .par_iter()
        .map(|&i| {
            let l = &plans[i];
            score(sg, sys, &|d| l.node(d)).map(|sc| (i, sc))
        })
        .collect::<Result<_, _>>()?;
    let by_index: HashMap<usize, (u64, u64)> = scored.into_iter().collect();
    let candidates: Vec<CandidateScore> = (0..orders.len())
        .map(|i| {
            let (m, h) = by_index[&duplicate_of[i].unwrap_or(i)];
            CandidateScore {
                order: orders[i],
                max_sharing: m,
                total_hops: h,
                duplicate_of: duplicate_of[i],
            }
        })
        .collect();
    let best = (0..orders.len())
        .min_by_key(|&i| (candidates[i].max_sharing, candidates[i].total_hops, i))
        .expect("24 candidates");
    let order = orders[best];
    Ok(materialize(sg, sys, order, best, candidates)?)
}

/// Full mapping for one ordering.
pub fn materialize(
    sg: &SuperGraph,
    sys: &SystemGraph,
    order: AxisOrder,
    index: usize,
    candidates: Vec<CandidateScore>,
) -> Result<Mapping, MappingError> {
    let layout = Layout::new(order, &sg.strategy, sys);
    let mut placements: Vec<Placement> = sg
        .devices()
        .iter()
        .map(|d| Placement { device: *d, node: layout.node(d) })
        .collect();
    placements.sort_by(|a, b| a.device.cmp(&b.device));
    let mut share: BTreeMap<Link, u64> = BTreeMap::new();
    let mut cache: HashMap<(u64, u64), Vec<Link>> = HashMap::new();
    let mut edge_routes = Vec::new();
    for (idx, e) in sg.cross_edges() {
        let a = layout.node(&e.src.device);
        let b = layout.node(&e.dst.device);
        if !cache.contains_key(&(a, b)) {
            cache.insert((a, b), route(a, b, sys)?);
        }
        let links = cache[&(a, b)].clone();
        for l in &links {
            *share.entry(*l).or_insert(0) += 1;
        }
        edge_routes.push(EdgeRoute { edge: idx, src_node: a, dst_node: b, links });
    }
    let total_hops = edge_routes.iter().map(|r| r.links.len() as u64).sum();
    Ok(Mapping {
        chosen_order: order,
        chosen_index: index,
        placements,
        max_sharing: share.values().copied().max().unwrap_or(0),
        total_hops,
        link_sharing: share
            .into_iter()
            .map(|(link, edges)| LinkLoad { link, edges })
            .collect(),
        edge_routes,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{MlpSpec, Topology, TopologyKind};
    use crate::graph::{transform, ComputeGraph};
    use std::collections::BTreeSet;

    fn figure_sg() -> SuperGraph {
        let g = ComputeGraph::feed_forward(
            &MlpSpec { batch_size: 48, widths: vec![32, 32, 32, 32], backward: false },
            2,
        )
        .unwrap();
        transform(&g, &ParallelismStrategy::rc(4, 2, 3, 2)).unwrap()
    }

    #[test]
    fn orders_are_all_distinct_permutations() {
        let o = all_orders();
        assert_eq!(o.len(), 24);
        assert_eq!(o.iter().collect::<BTreeSet<_>>().len(), 24);
        assert_eq!(o[0], [ParallelAxis::Kp1, ParallelAxis::Kp2, ParallelAxis::Lp, ParallelAxis::Dp]);
    }

    #[test]
    fn hypercube_onto_mesh() {
        let sg = figure_sg();
        let sys = SystemGraph::mesh2d(6, 8, 1, 1);
        let m = map_devices(&sg, &sys).unwrap();
        let nodes: BTreeSet<u64> = m.placements.iter().map(|p| p.node).collect();
        assert_eq!(nodes.len(), 48);
        assert!(m.edge_routes.iter().any(|r| r.links.len() > 1));
        assert!(m.max_sharing <= m.candidates[0].max_sharing);
        let total: u64 = m.link_sharing.iter().map(|l| l.edges).sum();
        assert_eq!(total, m.total_hops);
    }

    #[test]
    fn ring_on_ring() {
        let g = ComputeGraph::gemm(64, 64, 64, 2).unwrap();
        let sg = transform(&g, &ParallelismStrategy::rc(1, 1, 4, 1)).unwrap();
        let sys = SystemGraph::torus(vec![4], vec![1]);
        let m = map_devices(&sg, &sys).unwrap();
        assert_eq!(m.max_sharing, 1);
        assert!(m.edge_routes.iter().all(|r| r.links.len() == 1));
    }

    #[test]
    fn snake_steps_are_neighbours() {
        for radix in [vec![3u64, 3], vec![4, 2, 3], vec![1, 5]] {
            let total: u64 = radix.iter().product();
            let pos: Vec<u64> = (0..total).map(|p| snake_node(&radix, p)).collect();
            assert_eq!(pos.iter().collect::<BTreeSet<_>>().len() as u64, total);
            let topo = Topology::new(TopologyKind::Mesh, radix.clone());
            for w in pos.windows(2) {
                assert_eq!(route_in(&topo, w[0], w[1]).unwrap().len(), 1);
            }
        }
    }

    #[test]
    fn odd_ring_folds_into_two_rows() {
        let g = ComputeGraph::gemm(64, 64, 64, 2).unwrap();
        let sg = transform(&g, &ParallelismStrategy::rc(1, 1, 6, 1)).unwrap();
        let sys = SystemGraph::mesh2d(4, 4, 1, 1);
        let layout = Layout::new(all_orders()[0], &sg.strategy, &sys);
        assert!(matches!(layout.axes[3], AxisPlacement::Fold { half: 3, .. }));
        let nodes: Vec<u64> = sg.devices().iter().map(|d| layout.node(d)).collect();
        assert_eq!(nodes, vec![0, 1, 2, 6, 5, 4]);
        assert_eq!(map_devices(&sg, &sys).unwrap().max_sharing, 1);
    }

    #[test]
    fn axes_wrap_to_the_next_dimension() {
        let sys = SystemGraph::mesh2d(3, 3, 1, 1);
        let layout = Layout::new(all_orders()[0], &ParallelismStrategy::rc(2, 1, 2, 1), &sys);
        // kp1 along x, dp does not fit beside it and moves to y.
        assert_eq!(layout.axes[0], AxisPlacement::Stride(1));
        assert_eq!(layout.axes[3], AxisPlacement::Stride(3));
        assert!(layout.snake.is_none());
    }

    #[test]
    fn not_enough_nodes() {
        let sys = SystemGraph::mesh2d(4, 4, 1, 1);
        assert!(matches!(
            map_devices(&figure_sg(), &sys),
            Err(MappingError::InsufficientNodes { needed: 48, available: 16 })
        ));
    }

    #[test]
    fn bottleneck_bandwidth() {
        let sg = figure_sg();
        let sys = SystemGraph::mesh2d(6, 8, 1, 1);
        let m = map_devices(&sg, &sys).unwrap();
        let lm = LinkModel::uniform(100e9, 0.0);
        let share = m.sharing_map();
        for (r, bw) in m.edge_routes.iter().zip(m.effective_bandwidth(&lm)) {
            let worst = r.links.iter().map(|l| share[l]).max().unwrap();
            assert_eq!(bw, 100e9 / worst as f64);
        }
    }
}
