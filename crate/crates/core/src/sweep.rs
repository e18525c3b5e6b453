//! Technology sweeps: one prediction per value of a single axis.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arch::{generate, ArchSpec};
use crate::config::{ParallelismStrategy, ResolvedConfig, SystemGraph, Topology, TopologyKind};
use crate::error::{Error, Result};
use crate::perf::{predict_on, PredictOptions, Prediction};
use crate::presets;
use crate::search::parallelism_search;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    LogicNode,
    HbmBandwidth,
    NetworkBandwidth,
    NodesPerPackage,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 4] = [
        SweepAxis::LogicNode,
        SweepAxis::HbmBandwidth,
        SweepAxis::NetworkBandwidth,
        SweepAxis::NodesPerPackage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::LogicNode => "logic_node",
            SweepAxis::HbmBandwidth => "hbm_bandwidth",
            SweepAxis::NetworkBandwidth => "network_bandwidth",
            SweepAxis::NodesPerPackage => "nodes_per_package",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                format!(
                    "unknown sweep axis '{s}' (expected one of {})",
                    SweepAxis::ALL.map(|a| a.name()).join(", ")
                )
            })
    }
}

/// One resolved sweep point.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepValue {
    Logic(String),
    /// Main-memory bandwidth per node, TB/s.
    Hbm(f64),
    /// Inter-package link bandwidth, GB/s.
    Network(f64),
    NodesPerPackage(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<String>,
    /// Re-run the parallelism search at every point.
    pub resweep: bool,
}

impl SweepSpec {
    /// Resolve preset names and numbers; values must be non-empty and strictly monotone.
    pub fn resolve(&self) -> std::result::Result<Vec<SweepValue>, String> {
        if self.values.is_empty() {
            return Err("sweep needs at least one value".into());
        }
        let parsed: Vec<(SweepValue, f64)> = self
            .values
            .iter()
            .map(|v| {
                let v = v.trim();
                match self.axis {
                    SweepAxis::LogicNode => presets::logic_node_index(v)
                        .map(|i| (SweepValue::Logic(v.to_string()), i as f64))
                        .ok_or_else(|| {
                            format!("unknown logic node '{v}' (known: {})", presets::LOGIC_NODES.join(", "))
                        }),
                    SweepAxis::HbmBandwidth => presets::hbm_bandwidth_tbps(v)
                        .filter(|b| *b > 0.0)
                        .map(|b| (SweepValue::Hbm(b), b))
                        .ok_or_else(|| format!("invalid memory bandwidth '{v}'")),
                    SweepAxis::NetworkBandwidth => presets::network_bandwidth_gbps(v)
                        .filter(|b| *b > 0.0)
                        .map(|b| (SweepValue::Network(b), b))
                        .ok_or_else(|| format!("invalid network bandwidth '{v}'")),
                    SweepAxis::NodesPerPackage => v
                        .parse::<u64>()
                        .ok()
                        .filter(|n| *n >= 1)
                        .map(|n| (SweepValue::NodesPerPackage(n), n as f64))
                        .ok_or_else(|| format!("invalid node count '{v}'")),
                }
            })
            .collect::<std::result::Result<_, _>>()?;
        let keys: Vec<f64> = parsed.iter().map(|p| p.1).collect();
        let up = keys.windows(2).all(|w| w[1] > w[0]);
        let down = keys.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(format!("{} values must be strictly monotone", self.axis));
        }
        Ok(parsed.into_iter().map(|p| p.0).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: String,
    pub end_to_end_s: Option<f64>,
    /// `ok` or `infeasible`.
    pub status: String,
    /// Roofline term limiting the most shards.
    pub bound: String,
    pub speedup_vs_first: Option<f64>,
    pub strategy: String,
    #[serde(skip)]
    pub detail: Option<String>,
}

pub const SWEEP_COLUMNS: [&str; 7] =
    ["axis", "value", "end_to_end_s", "status", "bound", "speedup_vs_first", "strategy"];

/// Split `total` nodes into packages of `per_package`, both levels as tori.
pub fn repackage(total: u64, per_package: u64) -> std::result::Result<SystemGraph, String> {
    if total % per_package != 0 {
        return Err(format!("{per_package} nodes per package does not divide {total} nodes"));
    }
    let packages = total / per_package;
    let mut intra = Topology::new(TopologyKind::Torus, vec![per_package]);
    if per_package > 1 {
        intra.link_bandwidth = Some(presets::MULTI_NODE_INTRA_LINK_BW);
    }
    Ok(SystemGraph {
        num_packages: packages,
        nodes_per_package: per_package,
        intra,
        inter: Topology::new(TopologyKind::Torus, near_square(packages)),
    })
}

fn near_square(n: u64) -> Vec<u64> {
    let mut a = (n as f64).sqrt() as u64;
    while a > 1 && n % a != 0 {
        a -= 1;
    }
    if a <= 1 {
        vec![n]
    } else {
        vec![n / a, a]
    }
}

/// Architecture and system for one sweep point.
pub fn apply(cfg: &ResolvedConfig, value: &SweepValue) -> Result<(ArchSpec, SystemGraph)> {
    let mut tech = cfg.tech.clone();
    let mut sys = cfg.system.clone();
    if let SweepValue::Logic(label) = value {
        tech = presets::logic_node(&cfg.tech, label).ok_or_else(|| {
            Error::Search(format!(
                "cannot scale from {} to {label}",
                cfg.tech.compute.tech_node
            ))
        })?;
    }
    let mut arch = generate(&tech, &cfg.budgets, &cfg.arch_template)?;
    match value {
        SweepValue::Logic(_) => {}
        SweepValue::Hbm(tbps) => arch.main_mem.bandwidth = tbps * 8e12,
        SweepValue::Network(gbps) => sys.inter.link_bandwidth = Some(gbps * 8e9),
        SweepValue::NodesPerPackage(n) => {
            sys = repackage(cfg.system.total_nodes(), *n).map_err(Error::Search)?;
        }
    }
    Ok((arch, sys))
}

fn dominant_bound(p: &Prediction) -> String {
    p.timing
        .bound_histogram
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(k, _)| k.clone())
        .unwrap_or_default()
}

/// One row per value, in input order. Engine errors become `infeasible` rows.
pub fn run_sweep(
    cfg: &ResolvedConfig,
    strategy: &ParallelismStrategy,
    spec: &SweepSpec,
    opts: &PredictOptions,
) -> std::result::Result<Vec<SweepRow>, String> {
    let values = spec.resolve()?;
    let mut rows: Vec<SweepRow> = spec
        .values
        .par_iter()
        .zip(values.par_iter())
        .map(|(raw, v)| {
            let outcome = apply(cfg, v).and_then(|(arch, sys)| {
                let s = if spec.resweep {
                    let ps = parallelism_search(&arch, &sys, &cfg.model, opts)?;
                    ps.best.ok_or_else(|| Error::Search("no feasible strategy".into()))?.0
                } else {
                    *strategy
                };
                predict_on(&arch, &sys, &cfg.model, &s, opts).map(|p| (s, p))
            });
            match outcome {
                Ok((s, p)) => SweepRow {
                    axis: spec.axis.to_string(),
                    value: raw.trim().to_string(),
                    end_to_end_s: Some(p.timing.end_to_end_s),
                    status: "ok".into(),
                    bound: dominant_bound(&p),
                    speedup_vs_first: None,
                    strategy: s.to_string(),
                    detail: None,
                },
                Err(e) => SweepRow {
                    axis: spec.axis.to_string(),
                    value: raw.trim().to_string(),
                    end_to_end_s: None,
                    status: "infeasible".into(),
                    bound: String::new(),
                    speedup_vs_first: None,
                    strategy: if spec.resweep { String::new() } else { strategy.to_string() },
                    detail: Some(e.to_string()),
                },
            }
        })
        .collect();
    if let Some(first) = rows[0].end_to_end_s {
        for r in &mut rows {
            r.speedup_vs_first = r.end_to_end_s.map(|t| first / t);
        }
    }
    Ok(rows)
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_COLUMNS).expect("in-memory write");
    for r in rows {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        w.write_record([
            r.axis.clone(),
            r.value.clone(),
            opt(r.end_to_end_s),
            r.status.clone(),
            r.bound.clone(),
            opt(r.speedup_vs_first),
            r.strategy.clone(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(axis: SweepAxis, values: &[&str]) -> SweepSpec {
        SweepSpec { axis, values: values.iter().map(|s| s.to_string()).collect(), resweep: false }
    }

    #[test]
    fn empty_values_rejected() {
        assert!(spec(SweepAxis::HbmBandwidth, &[]).resolve().is_err());
    }

    #[test]
    fn presets_and_numbers_resolve() {
        let v = spec(SweepAxis::HbmBandwidth, &["HBM2", "2", "HBM3", "3.3"]).resolve().unwrap();
        assert_eq!(v[0], SweepValue::Hbm(1.0));
        assert_eq!(v[3], SweepValue::Hbm(3.3));
        let v = spec(SweepAxis::NetworkBandwidth, &["NDR-x8", "GDR-x8"]).resolve().unwrap();
        assert_eq!(v[1], SweepValue::Network(3300.0));
    }

    #[test]
    fn non_monotone_rejected() {
        assert!(spec(SweepAxis::NodesPerPackage, &["1", "4", "2"]).resolve().is_err());
        assert!(spec(SweepAxis::LogicNode, &["N7", "N12"]).resolve().is_ok());
        assert!(spec(SweepAxis::LogicNode, &["N7", "N9"]).resolve().is_err());
    }

    #[test]
    fn axis_names_round_trip() {
        for a in SweepAxis::ALL {
            assert_eq!(a.name().parse::<SweepAxis>().unwrap(), a);
        }
        assert!("voltage".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn repackaging_keeps_node_count() {
        for n in [1, 2, 4, 8] {
            let s = repackage(512, n).unwrap();
            assert_eq!(s.total_nodes(), 512);
            s.validate().unwrap();
        }
        assert!(repackage(512, 3).is_err());
    }

    #[test]
    fn csv_header_is_fixed() {
        let csv = to_csv(&[]);
        assert_eq!(csv.trim(), SWEEP_COLUMNS.join(","));
    }
}
