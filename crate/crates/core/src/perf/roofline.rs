//! Hierarchical roofline: the slowest of compute and every memory level bounds a kernel.

use serde::{Deserialize, Serialize};

use crate::arch::ArchSpec;

pub const MAIN_LEVEL: &str = "main";
pub const COMPUTE_BOUND: &str = "compute";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTraffic {
    pub level: String,
    pub bytes: u64,
    /// Bits/s.
    pub bandwidth: f64,
    /// Flops per byte; absent when the level sees no traffic.
    pub oi: Option<f64>,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RooflineProfile {
    /// GEMM plus elementwise flops.
    pub flops: u64,
    pub compute_time: f64,
    /// Registers first, main memory last.
    pub levels: Vec<LevelTraffic>,
    pub kernel_time: f64,
    /// `compute` or the name of the limiting memory level.
    pub bound: String,
}

/// Roofline over explicit `(level, bytes, bits_per_second)` terms.
pub fn roofline(flops: u64, effective_throughput: f64, traffic: &[(&str, u64, f64)]) -> RooflineProfile {
    let compute_time = flops as f64 / effective_throughput;
    let mut kernel_time = compute_time;
    let mut bound = COMPUTE_BOUND.to_string();
    let levels = traffic
        .iter()
        .map(|&(name, bytes, bw)| {
            let time = if bytes == 0 { 0.0 } else { bytes as f64 * 8.0 / bw };
            if time > kernel_time {
                kernel_time = time;
                bound = name.to_string();
            }
            LevelTraffic {
                level: name.to_string(),
                bytes,
                bandwidth: bw,
                oi: (bytes > 0).then(|| flops as f64 / bytes as f64),
                time,
            }
        })
        .collect();
    RooflineProfile { flops, compute_time, levels, kernel_time, bound }
}

/// Roofline against an architecture; `accesses` lists bytes per cache level then main memory.
pub fn kernel_time(flops: u64, arch: &ArchSpec, accesses: &[u64]) -> RooflineProfile {
    assert_eq!(accesses.len(), arch.mem_levels.len() + 1, "one access count per level");
    let mut terms: Vec<(&str, u64, f64)> = arch
        .mem_levels
        .iter()
        .zip(accesses)
        .map(|(l, &b)| (l.name.as_str(), b, l.bandwidth))
        .collect();
    terms.push((MAIN_LEVEL, accesses[accesses.len() - 1], arch.main_mem.bandwidth));
    roofline(flops, arch.effective_throughput(), &terms)
}
