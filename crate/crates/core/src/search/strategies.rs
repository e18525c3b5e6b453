//! Exhaustive enumeration of parallelism strategies for a device count.

use rayon::prelude::*;
use serde::Serialize;

use crate::arch::ArchSpec;
use crate::config::{ModelSpec, ParallelismStrategy, SystemGraph};
use crate::error::{Error, PerfError, Result};
use crate::perf::{predict_on, PredictOptions};

fn divisors(n: u64) -> Vec<u64> {
    (1..=n).filter(|d| n % d == 0).collect()
}

/// Every RC `(kp1, kp2, dp, lp)` and CR `(kp1, dp, lp)` whose product is
/// `total_devices`, with at most `layers` pipeline stages. RC first, each
/// kind in lexicographic factor order.
pub fn enumerate_strategies(total_devices: u64, layers: u64) -> Vec<ParallelismStrategy> {
    let mut out = Vec::new();
    for kp1 in divisors(total_devices) {
        let r1 = total_devices / kp1;
        for kp2 in divisors(r1) {
            let r2 = r1 / kp2;
            for dp in divisors(r2) {
                let lp = r2 / dp;
                if lp <= layers {
                    out.push(ParallelismStrategy::rc(kp1, kp2, dp, lp));
                }
            }
        }
    }
    for kp1 in divisors(total_devices) {
        let r1 = total_devices / kp1;
        for dp in divisors(r1) {
            let lp = r1 / dp;
            if lp <= layers {
                out.push(ParallelismStrategy::cr(kp1, dp, lp));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyOutcome {
    pub strategy: ParallelismStrategy,
    pub end_to_end_s: Option<f64>,
    /// `ok` or `infeasible`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParallelismSearch {
    pub outcomes: Vec<StrategyOutcome>,
    /// Fastest feasible strategy; ties go to the earlier enumeration index.
    pub best: Option<(ParallelismStrategy, f64)>,
}

/// Errors that mark a strategy infeasible rather than abort the search.
pub fn is_infeasibility(e: &Error) -> bool {
    matches!(
        e,
        Error::Graph(_) | Error::Mapping(_) | Error::Perf(PerfError::Capacity(_)) | Error::Sizing(_)
    )
}

/// Time every strategy that uses all nodes of `sys`.
pub fn parallelism_search(
    arch: &ArchSpec,
    sys: &SystemGraph,
    model: &ModelSpec,
    opts: &PredictOptions,
) -> Result<ParallelismSearch> {
    let candidates = enumerate_strategies(sys.total_nodes(), model.num_layers());
    let outcomes: Vec<StrategyOutcome> = candidates
        .par_iter()
        .map(|s| match predict_on(arch, sys, model, s, opts) {
            Ok(p) => Ok(StrategyOutcome {
                strategy: *s,
                end_to_end_s: Some(p.timing.end_to_end_s),
                status: "ok".into(),
                reason: None,
            }),
            Err(e) if is_infeasibility(&e) => Ok(StrategyOutcome {
                strategy: *s,
                end_to_end_s: None,
                status: "infeasible".into(),
                reason: Some(e.to_string()),
            }),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let best = outcomes
        .iter()
        .filter_map(|o| o.end_to_end_s.map(|t| (o.strategy, t)))
        .fold(None, |acc: Option<(ParallelismStrategy, f64)>, (s, t)| match acc {
            Some((_, bt)) if bt <= t => acc,
            _ => Some((s, t)),
        });
    Ok(ParallelismSearch { outcomes, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn brute(total: u64, layers: u64) -> (BTreeSet<(u64, u64, u64, u64)>, BTreeSet<(u64, u64, u64)>) {
        let mut rc = BTreeSet::new();
        let mut cr = BTreeSet::new();
        for a in 1..=total {
            for b in 1..=total {
                for c in 1..=total {
                    for d in 1..=layers.min(total) {
                        if a * b * c * d == total {
                            rc.insert((a, b, c, d));
                        }
                    }
                }
            }
        }
        for a in 1..=total {
            for c in 1..=total {
                for d in 1..=layers.min(total) {
                    if a * c * d == total {
                        cr.insert((a, c, d));
                    }
                }
            }
        }
        (rc, cr)
    }

    #[test]
    fn four_devices_two_layers() {
        let all = enumerate_strategies(4, 2);
        for s in [
            ParallelismStrategy::rc(4, 1, 1, 1),
            ParallelismStrategy::rc(2, 2, 1, 1),
            ParallelismStrategy::rc(1, 1, 4, 1),
            ParallelismStrategy::rc(2, 1, 1, 2),
        ] {
            assert!(all.contains(&s));
        }
        let (rc, cr) = brute(4, 2);
        assert_eq!(all.len(), rc.len() + cr.len());
    }

    #[test]
    fn single_device_is_identity_per_kind() {
        assert_eq!(
            enumerate_strategies(1, 3),
            vec![ParallelismStrategy::rc(1, 1, 1, 1), ParallelismStrategy::cr(1, 1, 1)]
        );
    }

    #[test]
    fn complete_and_unique() {
        for total in [1, 2, 6, 12, 16, 30, 64] {
            for layers in [1, 2, 5] {
                let all = enumerate_strategies(total, layers);
                let uniq: BTreeSet<_> = all.iter().collect();
                assert_eq!(uniq.len(), all.len());
                let (rc, cr) = brute(total, layers);
                let got_rc: BTreeSet<_> = all
                    .iter()
                    .filter(|s| s.kind == crate::config::KernelKind::RC)
                    .map(|s| (s.kp1, s.kp2, s.dp, s.lp))
                    .collect();
                let got_cr: BTreeSet<_> = all
                    .iter()
                    .filter(|s| s.kind == crate::config::KernelKind::CR)
                    .map(|s| (s.kp1, s.dp, s.lp))
                    .collect();
                assert_eq!(got_rc, rc);
                assert_eq!(got_cr, cr);
            }
        }
    }
}
