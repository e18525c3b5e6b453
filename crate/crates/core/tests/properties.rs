use std::collections::BTreeSet;
use std::sync::OnceLock;

use proptest::prelude::*;

use crossflow::arch::{generate, ArchSpec};
use crossflow::config::{MlpSpec, ParallelismStrategy, SystemGraph};
use crossflow::graph::{transform, ComputeGraph, Dims};
use crossflow::mapping::map_devices;
use crossflow::perf::{compulsory_elems, search_tilings, TaskGraph};
use crossflow::presets;

fn arch() -> &'static ArchSpec {
    static ARCH: OnceLock<ArchSpec> = OnceLock::new();
    ARCH.get_or_init(|| {
        let cfg = presets::reference_config();
        generate(&cfg.tech, &cfg.budgets, &cfg.arch_template).unwrap()
    })
}

fn strategy() -> impl Strategy<Value = ParallelismStrategy> {
    (1u64..=3, 1u64..=3, 1u64..=3, 1u64..=2, any::<bool>()).prop_map(|(a, b, d, l, rc)| {
        if rc {
            ParallelismStrategy::rc(a, b, d, l)
        } else {
            ParallelismStrategy::cr(a, d, l)
        }
    })
}

fn mlp() -> impl Strategy<Value = ComputeGraph> {
    (4u64..=24, prop::collection::vec(4u64..=24, 2..=4), any::<bool>()).prop_map(|(batch, widths, backward)| {
        ComputeGraph::feed_forward(&MlpSpec { batch_size: batch, widths, backward }, 2).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tiling_respects_lower_bounds(m in 1u64..3000, n in 1u64..3000, k in 1u64..3000, seed in 0u64..1000) {
        let d = Dims::new(m, n, k);
        let r = search_tilings(&d, 0, 2, arch(), 8, seed).unwrap();
        let compulsory = (compulsory_elems(&d) * 2) as u64;
        // Every cache level and main memory moves at least the compulsory bytes.
        for l in &r.profile.levels[1..] {
            prop_assert!(l.bytes >= compulsory, "{} moved {} < {}", l.level, l.bytes, compulsory);
        }
        let p = &r.profile;
        prop_assert!(p.kernel_time >= p.compute_time);
        for l in &p.levels {
            prop_assert!(p.kernel_time >= l.time);
            if let Some(oi) = l.oi {
                let flops = oi * l.bytes as f64;
                prop_assert!((flops - p.flops as f64).abs() <= 1e-9 * p.flops as f64);
            }
        }
    }

    #[test]
    fn tiling_is_deterministic(m in 1u64..2000, n in 1u64..2000, k in 1u64..2000, seed in 0u64..1000) {
        let d = Dims::new(m, n, k);
        let a = search_tilings(&d, 0, 2, arch(), 8, seed).unwrap();
        let b = search_tilings(&d, 0, 2, arch(), 8, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn more_bandwidth_is_never_slower(m in 1u64..4000, n in 1u64..4000, k in 1u64..4000, scale in 1.0f64..8.0) {
        let d = Dims::new(m, n, k);
        let mut fast = arch().clone();
        fast.main_mem.bandwidth *= scale;
        let slow = search_tilings(&d, 0, 2, arch(), 8, 0).unwrap();
        let quick = search_tilings(&d, 0, 2, &fast, 8, 0).unwrap();
        prop_assert!(quick.profile.kernel_time <= slow.profile.kernel_time);
    }

    #[test]
    fn schedules_are_valid(
        durations in prop::collection::vec(0u32..20, 1..16),
        resources in prop::collection::vec(0usize..3, 16),
        dep_bits in prop::collection::vec(any::<u16>(), 16),
    ) {
        let mut g = TaskGraph::new();
        for r in 0..3 {
            g.add_resource(format!("r{r}"));
        }
        for (i, &d) in durations.iter().enumerate() {
            let deps: Vec<usize> = (0..i).filter(|j| dep_bits[i] >> j & 1 == 1).collect();
            g.add_task(format!("t{i}"), resources[i], d as f64 * 0.5, deps);
        }
        let s = g.simulate().unwrap();
        for (i, t) in g.tasks.iter().enumerate() {
            prop_assert_eq!(s.finish[i], s.start[i] + t.duration);
            for &d in &t.deps {
                prop_assert!(s.start[i] >= s.finish[d]);
            }
            // Running tasks on one resource never overlap.
            for (j, u) in g.tasks.iter().enumerate().skip(i + 1) {
                if u.resource == t.resource && t.duration > 0.0 && u.duration > 0.0 {
                    prop_assert!(s.finish[i] <= s.start[j] || s.finish[j] <= s.start[i]);
                }
            }
        }
        let busiest = (0..3)
            .map(|r| g.tasks.iter().filter(|t| t.resource == r).map(|t| t.duration).sum::<f64>())
            .fold(0.0, f64::max);
        prop_assert!(s.end_to_end >= busiest);
        prop_assert_eq!(s.end_to_end, s.finish.iter().copied().fold(0.0, f64::max));
    }

    #[test]
    fn expansion_conserves_work(g in mlp(), s in strategy()) {
        let Ok(sg) = transform(&g, &s) else { return Ok(()) };
        for n in &g.nodes {
            let total: u64 = sg.shards_of(n.id).map(|x| x.flops).sum();
            prop_assert_eq!(total, n.flops);
            prop_assert_eq!(sg.shards_of(n.id).count() as u64, s.total_devices() / s.lp);
        }
        for (ei, e) in g.edges.iter().enumerate() {
            let moved: u64 = sg
                .edges
                .iter()
                .filter(|x| x.origin == crossflow::graph::EdgeOrigin::Edge(ei))
                .map(|x| x.bytes)
                .sum();
            prop_assert_eq!(moved, e.bytes);
        }
    }

    #[test]
    fn mapping_is_injective_and_conserves_hops(g in mlp(), s in strategy()) {
        let Ok(sg) = transform(&g, &s) else { return Ok(()) };
        let sys = SystemGraph::mesh2d(4, 4, 2, 1);
        let m = map_devices(&sg, &sys).unwrap();
        let nodes: BTreeSet<u64> = m.placements.iter().map(|p| p.node).collect();
        prop_assert_eq!(nodes.len(), m.placements.len());
        prop_assert!(nodes.iter().all(|&n| n < sys.total_nodes()));
        let shared: u64 = m.link_sharing.iter().map(|l| l.edges).sum();
        prop_assert_eq!(shared, m.total_hops);
        prop_assert!(m.candidates.iter().all(|c| m.max_sharing <= c.max_sharing));
        for r in &m.edge_routes {
            prop_assert_eq!(r.links.is_empty(), r.src_node == r.dst_node);
        }
    }
}
