//! Design-space search: gradient descent over budget fractions and
//! enumeration of parallelism strategies.

pub mod gd;
pub mod projection;
pub mod strategies;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use gd::{
    estimate_gradient, gd_search, multi_start, random_start, GdResult, MultiStartResult, Normalization,
    Objective, SearchConfig, TracePoint,
};
pub use projection::{is_feasible, project_constraints, project_group};
pub use strategies::{enumerate_strategies, is_infeasibility, parallelism_search, ParallelismSearch, StrategyOutcome};

use crate::arch::{generate, ArchSpec, BudgetAudit};
use crate::config::{ArchTemplate, Component, Fractions, ParallelismStrategy, ResolvedConfig, ResourceBudget};
use crate::error::{Error, Result};
use crate::perf::{predict_on, PredictOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Arch,
    Parallelism,
    Joint,
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchMode::Arch => "arch",
            SearchMode::Parallelism => "parallelism",
            SearchMode::Joint => "joint",
        })
    }
}

impl FromStr for SearchMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "arch" => Ok(SearchMode::Arch),
            "parallelism" => Ok(SearchMode::Parallelism),
            "joint" => Ok(SearchMode::Joint),
            _ => Err(format!("unknown search mode '{s}' (expected arch, parallelism or joint)")),
        }
    }
}

/// The fraction vector `W`: area, power and perimeter shares of each component.
#[derive(Debug, Clone, PartialEq)]
pub struct HardwareSpace {
    pub components: Vec<Component>,
    pub base: ResourceBudget,
}

impl HardwareSpace {
    pub fn new(base: &ResourceBudget, template: &ArchTemplate) -> Self {
        let mut components = vec![Component::Core];
        components.extend((0..template.mem_levels.len()).map(|i| Component::Cache(i as u8)));
        components.extend([Component::Dram, Component::NetIntra, Component::NetInter]);
        Self { components, base: base.clone() }
    }

    pub fn h(&self) -> usize {
        self.components.len()
    }

    pub fn groups(&self) -> [usize; 3] {
        [self.h(); 3]
    }

    pub fn encode(&self, b: &ResourceBudget) -> Vec<f64> {
        let get = |f: &Fractions, c: &Component| f.get(c).copied().unwrap_or(0.0);
        let mut w = Vec::with_capacity(3 * self.h());
        for group in [&b.area_frac, &b.power_frac, &b.perimeter_frac] {
            w.extend(self.components.iter().map(|c| get(group, c)));
        }
        w
    }

    pub fn decode(&self, w: &[f64]) -> ResourceBudget {
        let h = self.h();
        let group = |g: usize| -> Fractions {
            self.components
                .iter()
                .zip(&w[g * h..(g + 1) * h])
                .map(|(c, x)| (*c, *x))
                .collect()
        };
        self.base.with_fractions(group(0), group(1), group(2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignEval {
    pub w: Vec<f64>,
    pub end_to_end_s: f64,
    pub strategy: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartTrace {
    pub start: usize,
    pub best_objective: f64,
    pub converged: bool,
    pub evaluations: usize,
    pub steps: Vec<TracePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchReport {
    pub mode: SearchMode,
    /// Component order of each third of `w`.
    pub components: Vec<String>,
    /// Objective values in traces are iteration time over the baseline time.
    pub baseline: DesignEval,
    pub best: DesignEval,
    /// Baseline time over best time.
    pub speedup: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<SearchConfig>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub restarts: Vec<RestartTrace>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub strategies: Vec<StrategyOutcome>,
    pub audit: BudgetAudit,
    pub audit_holds: bool,
}

/// Search inputs that stay fixed across the run.
pub struct SearchContext<'a> {
    pub cfg: &'a ResolvedConfig,
    pub opts: PredictOptions,
}

impl SearchContext<'_> {
    fn arch_for(&self, b: &ResourceBudget) -> Result<ArchSpec> {
        Ok(generate(&self.cfg.tech, b, &self.cfg.arch_template)?)
    }

    fn time(&self, arch: &ArchSpec, s: &ParallelismStrategy) -> Result<f64> {
        Ok(predict_on(arch, &self.cfg.system, &self.cfg.model, s, &self.opts)?.timing.end_to_end_s)
    }

    fn best_strategy(&self, arch: &ArchSpec) -> Result<Option<(ParallelismStrategy, f64)>> {
        Ok(parallelism_search(arch, &self.cfg.system, &self.cfg.model, &self.opts)?.best)
    }

    /// Time at `w`, or infinity when `w` yields no buildable or feasible design.
    fn objective_time(&self, space: &HardwareSpace, w: &[f64], fixed: Option<&ParallelismStrategy>) -> Result<f64> {
        let arch = match self.arch_for(&space.decode(w)) {
            Ok(a) => a,
            Err(e) if is_infeasibility(&e) => return Ok(f64::INFINITY),
            Err(e) => return Err(e),
        };
        match fixed {
            Some(s) => match self.time(&arch, s) {
                Ok(t) => Ok(t),
                Err(e) if is_infeasibility(&e) => Ok(f64::INFINITY),
                Err(e) => Err(e),
            },
            None => Ok(self.best_strategy(&arch)?.map_or(f64::INFINITY, |b| b.1)),
        }
    }
}

fn report_restarts(ms: &MultiStartResult) -> Vec<RestartTrace> {
    ms.runs
        .iter()
        .enumerate()
        .map(|(i, r)| RestartTrace {
            start: i,
            best_objective: r.f,
            converged: r.converged,
            evaluations: r.evaluations,
            steps: r.trace.clone(),
        })
        .collect()
}

/// Fixed hardware: time every strategy.
pub fn search_parallelism(cfg: &ResolvedConfig, opts: &PredictOptions) -> Result<SearchReport> {
    let ctx = SearchContext { cfg, opts: *opts };
    let space = HardwareSpace::new(&cfg.budgets, &cfg.arch_template);
    let arch = ctx.arch_for(&cfg.budgets)?;
    let ps = parallelism_search(&arch, &cfg.system, &cfg.model, opts)?;
    let (s, t) = ps.best.ok_or_else(|| Error::Search("no feasible parallelism strategy".into()))?;
    // Baseline: the first feasible strategy in enumeration order.
    let first = ps
        .outcomes
        .iter()
        .find_map(|o| o.end_to_end_s.map(|t| (o.strategy, t)))
        .expect("a best implies a feasible outcome");
    let w = space.encode(&cfg.budgets);
    Ok(SearchReport {
        mode: SearchMode::Parallelism,
        components: space.components.iter().map(|c| c.to_string()).collect(),
        baseline: DesignEval { w: w.clone(), end_to_end_s: first.1, strategy: first.0.to_string() },
        best: DesignEval { w, end_to_end_s: t, strategy: s.to_string() },
        speedup: first.1 / t,
        config: None,
        restarts: vec![],
        strategies: ps.outcomes,
        audit_holds: arch.audit.holds(1e-9),
        audit: arch.audit,
    })
}

/// Fixed strategy: descend over budget fractions from the configured split
/// and `S - 1` random splits.
pub fn search_arch(
    cfg: &ResolvedConfig,
    strategy: &ParallelismStrategy,
    scfg: &SearchConfig,
    opts: &PredictOptions,
) -> Result<SearchReport> {
    hardware_search(cfg, Some(strategy), scfg, opts)
}

/// Budget fractions and strategy together: every candidate split is scored by
/// its best strategy.
pub fn search_joint(cfg: &ResolvedConfig, scfg: &SearchConfig, opts: &PredictOptions) -> Result<SearchReport> {
    hardware_search(cfg, None, scfg, opts)
}

fn hardware_search(
    cfg: &ResolvedConfig,
    fixed: Option<&ParallelismStrategy>,
    scfg: &SearchConfig,
    opts: &PredictOptions,
) -> Result<SearchReport> {
    scfg.validate().map_err(Error::Search)?;
    let ctx = SearchContext { cfg, opts: *opts };
    let space = HardwareSpace::new(&cfg.budgets, &cfg.arch_template);
    let w0 = space.encode(&cfg.budgets);
    let base_arch = ctx.arch_for(&cfg.budgets)?;
    let (base_strategy, base_time) = match fixed {
        Some(s) => (*s, ctx.time(&base_arch, s)?),
        None => ctx
            .best_strategy(&base_arch)?
            .ok_or_else(|| Error::Search("no feasible parallelism strategy at the baseline".into()))?,
    };
    let f = |w: &[f64]| -> Result<f64> { Ok(ctx.objective_time(&space, w, fixed)? / base_time) };
    let ms = multi_start(&f, scfg, &space.groups(), Some(&w0))?;
    let best_budget = space.decode(&ms.best.w);
    let best_arch = ctx.arch_for(&best_budget)?;
    let (best_strategy, best_time) = match fixed {
        Some(s) => (*s, ctx.time(&best_arch, s)?),
        None => ctx
            .best_strategy(&best_arch)?
            .ok_or_else(|| Error::Search("best point has no feasible strategy".into()))?,
    };
    let strategies = match fixed {
        Some(_) => vec![],
        None => parallelism_search(&best_arch, &cfg.system, &cfg.model, opts)?.outcomes,
    };
    Ok(SearchReport {
        mode: if fixed.is_some() { SearchMode::Arch } else { SearchMode::Joint },
        components: space.components.iter().map(|c| c.to_string()).collect(),
        baseline: DesignEval { w: w0, end_to_end_s: base_time, strategy: base_strategy.to_string() },
        best: DesignEval { w: ms.best.w.clone(), end_to_end_s: best_time, strategy: best_strategy.to_string() },
        speedup: base_time / best_time,
        config: Some(*scfg),
        restarts: report_restarts(&ms),
        strategies,
        audit_holds: best_arch.audit.holds(1e-9),
        audit: best_arch.audit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn encode_decode_round_trip() {
        let cfg = presets::reference_config();
        let space = HardwareSpace::new(&cfg.budgets, &cfg.arch_template);
        assert_eq!(space.h(), 7);
        let w = space.encode(&cfg.budgets);
        assert_eq!(w.len(), 21);
        assert_eq!(space.encode(&space.decode(&w)), w);
    }

    #[test]
    fn mode_names() {
        for m in [SearchMode::Arch, SearchMode::Parallelism, SearchMode::Joint] {
            assert_eq!(m.to_string().parse::<SearchMode>().unwrap(), m);
        }
        assert!("both".parse::<SearchMode>().is_err());
    }
}
