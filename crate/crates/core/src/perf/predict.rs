//! End-to-end iteration time of one strategy on one architecture.
//!
//! Shards of a kernel run in lockstep, so the supergraph collapses to one task
//! per kernel and micro-batch: the slowest shard's time, plus one task per
//! collective group timed by its slowest routed hop. Each pipeline stage owns a
//! compute resource and a network resource; each pair of communicating stages
//! owns a transfer resource.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use super::comm::collective_edge_time;
use super::roofline::RooflineProfile;
use super::schedule::{TaskGraph, TraceEntry};
use super::tiling::{search_tilings, TilingResult};
use crate::arch::{generate, ArchSpec};
use crate::config::{ModelSpec, ParallelismStrategy, ResolvedConfig, SystemGraph};
use crate::error::{PerfError, Result};
use crate::graph::{
    part, transform, ComputeGraph, CrossRole, Dims, EdgeKind, EdgeOrigin, NodeKind, SuperGraph,
};
use crate::mapping::{map_devices, AxisOrder, LinkModel, Mapping};

pub const DEFAULT_TILING_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictOptions {
    /// Tile candidates per memory level.
    pub tiling_samples: usize,
    pub seed: u64,
    /// Let gradient all-reduces start as soon as their gradients exist.
    /// When false they wait for every compute task of the iteration.
    pub overlap_collectives: bool,
    /// Overrides the model's micro-batch count.
    pub microbatches: Option<u64>,
}

impl Default for PredictOptions {
    fn default() -> Self {
        Self {
            tiling_samples: DEFAULT_TILING_SAMPLES,
            seed: 0,
            overlap_collectives: true,
            microbatches: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelTiming {
    pub node: usize,
    pub name: String,
    pub kind: NodeKind,
    pub layer: u64,
    pub stage: u64,
    pub shards: u64,
    /// Dims of the slowest shard.
    pub dims: Dims,
    pub time_s: f64,
    pub bound: String,
    pub tiling: TilingResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeTiming {
    pub role: CrossRole,
    pub origin: EdgeOrigin,
    pub edges: u64,
    /// Largest hop payload of the group.
    pub max_bytes: u64,
    pub steps: u64,
    pub max_hops: u64,
    pub min_effective_bandwidth: f64,
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingReport {
    pub end_to_end_s: f64,
    pub strategy: ParallelismStrategy,
    pub microbatches: u64,
    /// Per micro-batch.
    pub per_kernel: Vec<KernelTiming>,
    /// Per micro-batch for activations and operand collectives.
    pub per_edge: Vec<EdgeTiming>,
    /// Shards per limiting roofline term.
    pub bound_histogram: BTreeMap<String, u64>,
    pub schedule_trace: Vec<TraceEntry>,
    pub memory_footprint_bytes: f64,
    pub main_memory_bytes: f64,
}

impl TimingReport {
    pub fn longest_task(&self) -> f64 {
        self.schedule_trace
            .iter()
            .map(|t| t.end - t.start)
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MappingSummary {
    pub chosen_order: AxisOrder,
    pub chosen_index: usize,
    pub max_sharing: u64,
    pub total_hops: u64,
    pub sharing_histogram: BTreeMap<u64, u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Prediction {
    pub arch: ArchSpec,
    pub links: LinkModel,
    pub mapping: MappingSummary,
    pub timing: TimingReport,
    #[serde(skip)]
    pub supergraph: SuperGraph,
    #[serde(skip)]
    pub full_mapping: Mapping,
}

/// Generate the architecture from the configuration, then predict.
pub fn predict(cfg: &ResolvedConfig, s: &ParallelismStrategy, opts: &PredictOptions) -> Result<Prediction> {
    let arch = generate(&cfg.tech, &cfg.budgets, &cfg.arch_template)?;
    predict_on(&arch, &cfg.system, &cfg.model, s, opts)
}

/// Bytes one device holds: weights (and gradients when training) of its
/// stage plus the stashed forward activations of its batch share.
pub fn memory_footprint(g: &ComputeGraph, s: &ParallelismStrategy, node_stage: &[u64]) -> f64 {
    let training = g.nodes.iter().any(|n| !n.kind.is_forward());
    let factor = if training { 2 } else { 1 };
    let kp = s.kp1 * s.kp2;
    let mut per_stage = vec![0u128; s.lp as usize];
    for w in g.weight_nodes() {
        let n = &g.nodes[w];
        per_stage[node_stage[w] as usize] +=
            factor * part(n.weight_elems(), kp, 0) as u128 * n.precision_bytes as u128;
    }
    for n in g.nodes.iter().filter(|n| n.kind.is_forward()) {
        per_stage[node_stage[n.id] as usize] += part(n.bytes_out, s.dp * kp, 0) as u128;
    }
    per_stage.into_iter().max().unwrap_or(0) as f64
}

type KernelKey = (Dims, u64, u64);

/// Time every distinct shard shape once.
pub fn time_kernels(
    keys: &BTreeSet<KernelKey>,
    arch: &ArchSpec,
    samples: usize,
    seed: u64,
) -> std::result::Result<BTreeMap<KernelKey, TilingResult>, PerfError> {
    let keys: Vec<KernelKey> = keys.iter().copied().collect();
    let results: Vec<_> = keys
        .par_iter()
        .map(|&(d, extra, prec)| search_tilings(&d, extra, prec, arch, samples, seed))
        .collect::<std::result::Result<_, _>>()?;
    Ok(keys.into_iter().zip(results).collect())
}

pub fn predict_on(
    arch: &ArchSpec,
    sys: &SystemGraph,
    model: &ModelSpec,
    s: &ParallelismStrategy,
    opts: &PredictOptions,
) -> Result<Prediction> {
    let full = ComputeGraph::from_model(model)?;
    let micro = opts.microbatches.or(model.microbatches).unwrap_or(s.lp).max(1);
    let g = full.micro_batch(micro)?;
    let sg = transform(&g, s)?;

    let footprint = memory_footprint(&full, s, &sg.node_stage);
    let capacity = arch.main_mem_bytes();
    if footprint > capacity {
        return Err(PerfError::Capacity(format!(
            "{s} needs {footprint} bytes per device but main memory holds {capacity}"
        ))
        .into());
    }

    let mapping = map_devices(&sg, sys)?;
    let links = LinkModel::resolve(sys, arch);

    // Kernel times.
    let keys: BTreeSet<KernelKey> = sg
        .shards
        .iter()
        .map(|sh| (sh.dims, sh.elementwise_flops, g.precision_bytes))
        .collect();
    let timed = time_kernels(&keys, arch, opts.tiling_samples, opts.seed)?;
    let mut bound_histogram = BTreeMap::new();
    let mut slowest: Vec<Option<(f64, Dims, u64)>> = vec![None; g.nodes.len()];
    let mut shard_count = vec![0u64; g.nodes.len()];
    for sh in &sg.shards {
        let key = (sh.dims, sh.elementwise_flops, g.precision_bytes);
        let r = &timed[&key];
        *bound_histogram.entry(r.profile.bound.clone()).or_insert(0) += 1;
        shard_count[sh.id.node] += 1;
        let t = r.profile.kernel_time;
        let cur = &mut slowest[sh.id.node];
        if cur.map_or(true, |(bt, _, _)| t > bt) {
            *cur = Some((t, sh.dims, sh.elementwise_flops));
        }
    }
    let per_kernel: Vec<KernelTiming> = g
        .nodes
        .iter()
        .map(|n| {
            let (t, dims, extra) = slowest[n.id].expect("every node has a shard");
            let tiling = timed[&(dims, extra, g.precision_bytes)].clone();
            KernelTiming {
                node: n.id,
                name: n.name.clone(),
                kind: n.kind,
                layer: n.layer,
                stage: sg.node_stage[n.id],
                shards: shard_count[n.id],
                dims,
                time_s: t,
                bound: tiling.profile.bound.clone(),
                tiling,
            }
        })
        .collect();

    // Edge times, grouped by collective.
    let eff = mapping.effective_bandwidth(&links);
    let mut groups: BTreeMap<(CrossRole, EdgeOrigin), EdgeTiming> = BTreeMap::new();
    for (r, bw) in mapping.edge_routes.iter().zip(&eff) {
        let e = &sg.edges[r.edge];
        let EdgeKind::Cross(role) = e.kind else { continue };
        let lat: f64 = r.links.iter().map(|l| links.latency(l)).sum();
        let t = collective_edge_time(e.bytes, *bw, e.steps, lat);
        let entry = groups.entry((role, e.origin)).or_insert(EdgeTiming {
            role,
            origin: e.origin,
            edges: 0,
            max_bytes: 0,
            steps: e.steps,
            max_hops: 0,
            min_effective_bandwidth: f64::INFINITY,
            time_s: 0.0,
        });
        entry.edges += 1;
        entry.max_bytes = entry.max_bytes.max(e.bytes);
        entry.max_hops = entry.max_hops.max(r.links.len() as u64);
        entry.min_effective_bandwidth = entry.min_effective_bandwidth.min(*bw);
        entry.time_s = entry.time_s.max(t);
    }
    let group_time = |role: CrossRole, origin: EdgeOrigin| groups.get(&(role, origin)).map(|g| g.time_s);

    // Collapsed iteration graph.
    let mut tg = TaskGraph::new();
    let compute_res: Vec<usize> = (0..s.lp).map(|st| tg.add_resource(format!("stage{st}.compute"))).collect();
    let net_res: Vec<usize> = (0..s.lp).map(|st| tg.add_resource(format!("stage{st}.net"))).collect();
    let mut pipe_res: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    let order = g.topo_order()?;
    let mut inputs: Vec<Vec<usize>> = vec![Vec::new(); g.nodes.len()];
    for (ei, e) in g.edges.iter().enumerate() {
        inputs[e.dst].push(ei);
    }
    let mut output = vec![vec![usize::MAX; micro as usize]; g.nodes.len()];
    let mut compute_tasks = Vec::new();
    for forward in [true, false] {
        for mb in 0..micro as usize {
            for &n in order.iter().filter(|&&n| g.nodes[n].kind.is_forward() == forward) {
                let node = &g.nodes[n];
                let st = sg.node_stage[n];
                let mut deps = Vec::new();
                for &ei in &inputs[n] {
                    let e = &g.edges[ei];
                    let src = output[e.src][mb];
                    let src_stage = sg.node_stage[e.src];
                    if src_stage == st {
                        deps.push(src);
                        continue;
                    }
                    let res = match pipe_res.get(&(src_stage, st)) {
                        Some(&r) => r,
                        None => {
                            let id = tg.add_resource(format!("pipe{src_stage}->{st}"));
                            pipe_res.insert((src_stage, st), id);
                            id
                        }
                    };
                    let t = group_time(CrossRole::PipelineActivation, EdgeOrigin::Edge(ei)).unwrap_or(0.0);
                    let x = tg.add_task(
                        format!("xfer:{}->{}#mb{mb}", g.nodes[e.src].name, node.name),
                        res,
                        t,
                        vec![src],
                    );
                    deps.push(x);
                }
                if let Some(t) = group_time(CrossRole::KpGatherStep, EdgeOrigin::Node(n)) {
                    let gt = tg.add_task(format!("gather:{}#mb{mb}", node.name), net_res[st as usize], t, deps);
                    deps = vec![gt];
                }
                let c = tg.add_task(
                    format!("{}#mb{mb}", node.name),
                    compute_res[st as usize],
                    per_kernel[n].time_s,
                    deps,
                );
                compute_tasks.push(c);
                output[n][mb] = c;
                if let Some(t) = group_time(CrossRole::KpReduceStep, EdgeOrigin::Node(n)) {
                    output[n][mb] =
                        tg.add_task(format!("reduce:{}#mb{mb}", node.name), net_res[st as usize], t, vec![c]);
                }
            }
        }
    }
    for w in g.weight_nodes() {
        let Some(t) = group_time(CrossRole::RingAllreduceStep, EdgeOrigin::Node(w)) else { continue };
        let deps = if opts.overlap_collectives {
            output[w].clone()
        } else {
            let mut d = compute_tasks.clone();
            d.extend(output[w].iter().copied());
            d.sort_unstable();
            d.dedup();
            d
        };
        tg.add_task(
            format!("allreduce:{}", g.nodes[w].name),
            net_res[sg.node_stage[w] as usize],
            t,
            deps,
        );
    }
    let sched = tg.simulate()?;

    let timing = TimingReport {
        end_to_end_s: sched.end_to_end,
        strategy: *s,
        microbatches: micro,
        per_kernel,
        per_edge: groups.into_values().collect(),
        bound_histogram,
        schedule_trace: sched.trace,
        memory_footprint_bytes: footprint,
        main_memory_bytes: capacity,
    };
    Ok(Prediction {
        arch: arch.clone(),
        links,
        mapping: MappingSummary {
            chosen_order: mapping.chosen_order,
            chosen_index: mapping.chosen_index,
            max_sharing: mapping.max_sharing,
            total_hops: mapping.total_hops,
            sharing_histogram: mapping.sharing_histogram(),
        },
        timing,
        supergraph: sg,
        full_mapping: mapping,
    })
}

/// Roofline profile of the slowest shard of every kernel.
pub fn profiles(p: &Prediction) -> Vec<&RooflineProfile> {
    p.timing.per_kernel.iter().map(|k| &k.tiling.profile).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::MlpSpec;
    use crate::presets;

    fn one_node() -> SystemGraph {
        SystemGraph::single_node()
    }

    #[test]
    fn degenerate_strategy_is_single_roofline() {
        let cfg = presets::reference_config();
        let arch = generate(&cfg.tech, &cfg.budgets, &cfg.arch_template).unwrap();
        let model = ModelSpec::gemm(1024, 1024, 1024, 2);
        let p = predict_on(&arch, &one_node(), &model, &ParallelismStrategy::identity(), &Default::default())
            .unwrap();
        let d = Dims::new(1024, 1024, 1024);
        let t = search_tilings(&d, 0, 2, &arch, DEFAULT_TILING_SAMPLES, 0).unwrap();
        assert_eq!(p.timing.end_to_end_s, t.profile.kernel_time);
    }

    #[test]
    fn pipeline_overlaps_microbatches() {
        let cfg = presets::reference_config();
        let arch = generate(&cfg.tech, &cfg.budgets, &cfg.arch_template).unwrap();
        let model = ModelSpec::mlp(
            MlpSpec { batch_size: 256, widths: vec![512, 512, 512], backward: false },
            2,
        );
        let sys = SystemGraph::torus(vec![2], vec![1]);
        let s = ParallelismStrategy::rc(1, 1, 1, 2);
        let piped = predict_on(&arch, &sys, &model, &s, &PredictOptions { microbatches: Some(4), ..Default::default() })
            .unwrap();
        let serial = predict_on(&arch, &sys, &model, &s, &PredictOptions { microbatches: Some(1), ..Default::default() })
            .unwrap();
        assert!(piped.timing.end_to_end_s < serial.timing.end_to_end_s);
        assert!(piped.timing.end_to_end_s >= piped.timing.longest_task());
    }

    #[test]
    fn serialized_collectives_never_faster() {
        let cfg = presets::reference_config();
        let arch = generate(&cfg.tech, &cfg.budgets, &cfg.arch_template).unwrap();
        let model = ModelSpec::mlp(
            MlpSpec { batch_size: 128, widths: vec![256, 256, 256], backward: true },
            2,
        );
        let sys = SystemGraph::torus(vec![4], vec![1]);
        let s = ParallelismStrategy::rc(1, 1, 4, 1);
        let a = predict_on(&arch, &sys, &model, &s, &Default::default()).unwrap();
        let b = predict_on(&arch, &sys, &model, &s, &PredictOptions { overlap_collectives: false, ..Default::default() })
            .unwrap();
        assert!(b.timing.end_to_end_s >= a.timing.end_to_end_s);
        assert!(a.timing.per_edge.iter().any(|e| e.role == CrossRole::RingAllreduceStep));
    }

    #[test]
    fn too_many_devices_is_mapping_error() {
        let cfg = presets::reference_config();
        let arch = generate(&cfg.tech, &cfg.budgets, &cfg.arch_template).unwrap();
        let model = ModelSpec::gemm(1024, 1024, 1024, 2);
        let r = predict_on(&arch, &one_node(), &model, &ParallelismStrategy::rc(2, 1, 1, 1), &Default::default());
        assert!(matches!(r, Err(crate::Error::Mapping(_))));
    }
}
