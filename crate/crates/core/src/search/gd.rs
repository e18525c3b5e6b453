//! Projected gradient descent with exponential averaging in parameter space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::projection::project_constraints;
use crate::error::{Error, Result};

/// Black-box objective over the fraction vector.
pub type Objective<'a> = dyn Fn(&[f64]) -> Result<f64> + Sync + 'a;

/// What gets rescaled to unit Euclidean norm inside each update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Plain step `W - eta g`.
    #[default]
    None,
    /// Rescale the stepped point `W - eta g` before averaging.
    Parameter,
    /// Rescale the gradient before stepping.
    Gradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub eta: f64,
    pub beta: f64,
    pub steps: usize,
    pub restarts: usize,
    /// Finite-difference step in fraction units.
    pub h: f64,
    pub seed: u64,
    pub tol: f64,
    pub normalization: Normalization,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            eta: 0.05,
            beta: 0.1,
            steps: 100,
            restarts: 10,
            h: 1e-3,
            seed: 0,
            tol: 1e-6,
            normalization: Normalization::None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.eta > 0.0) {
            return Err(format!("eta must be > 0, got {}", self.eta));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(format!("beta must be in [0, 1), got {}", self.beta));
        }
        if self.steps == 0 || self.restarts == 0 {
            return Err("steps and restarts must be >= 1".into());
        }
        if !(self.h > 0.0) {
            return Err(format!("h must be > 0, got {}", self.h));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: usize,
    pub w: Vec<f64>,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdResult {
    /// Best point seen, not necessarily the last.
    pub w: Vec<f64>,
    pub f: f64,
    pub trace: Vec<TracePoint>,
    pub evaluations: usize,
    pub converged: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn scaled(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    if n > 0.0 {
        v.iter().map(|x| x / n).collect()
    } else {
        v.to_vec()
    }
}

/// Central differences; probes are projected before evaluation. An infinite
/// probe falls back to the one-sided difference on the other side.
pub fn estimate_gradient(f: &Objective<'_>, w: &[f64], h: f64, groups: &[usize]) -> Result<Vec<f64>> {
    let f0 = f(w)?;
    (0..w.len())
        .into_par_iter()
        .map(|i| {
            let mut plus = w.to_vec();
            plus[i] += h;
            let mut minus = w.to_vec();
            minus[i] -= h;
            let (plus, minus) = (project_constraints(&plus, groups), project_constraints(&minus, groups));
            let probe = |p: &[f64]| {
                f(p).map_err(|e| Error::Search(format!("objective failed at probe {p:?}: {e}")))
            };
            let (fp, fm) = (probe(&plus)?, probe(&minus)?);
            let (dp, dm) = (plus[i] - w[i], w[i] - minus[i]);
            Ok(match (fp.is_finite(), fm.is_finite()) {
                (true, true) if dp + dm > 0.0 => (fp - fm) / (dp + dm),
                (true, false) if dp > 0.0 && f0.is_finite() => (fp - f0) / dp,
                (false, true) if dm > 0.0 && f0.is_finite() => (f0 - fm) / dm,
                _ => 0.0,
            })
        })
        .collect()
}

pub fn gd_search(f: &Objective<'_>, cfg: &SearchConfig, init: &[f64], groups: &[usize]) -> Result<GdResult> {
    let mut w = init.to_vec();
    let mut m = init.to_vec();
    let f0 = f(&w)?;
    let mut evaluations = 1;
    let mut trace = vec![TracePoint { step: 0, w: w.clone(), f: f0 }];
    let (mut best_w, mut best_f) = (w.clone(), f0);
    let mut converged = false;
    for step in 1..=cfg.steps {
        let mut g = estimate_gradient(f, &w, cfg.h, groups)?;
        evaluations += 1 + 2 * w.len();
        if cfg.normalization == Normalization::Gradient {
            g = scaled(&g);
        }
        let mut stepped: Vec<f64> = w.iter().zip(&g).map(|(x, gi)| x - cfg.eta * gi).collect();
        if cfg.normalization == Normalization::Parameter {
            stepped = scaled(&stepped);
        }
        for (mi, si) in m.iter_mut().zip(&stepped) {
            *mi = cfg.beta * *mi + (1.0 - cfg.beta) * si;
        }
        let next = project_constraints(&m, groups);
        let fv = f(&next)?;
        evaluations += 1;
        let moved = norm(&next.iter().zip(&w).map(|(a, b)| a - b).collect::<Vec<_>>());
        trace.push(TracePoint { step, w: next.clone(), f: fv });
        if fv < best_f {
            best_f = fv;
            best_w = next.clone();
        }
        w = next;
        if moved < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(GdResult { w: best_w, f: best_f, trace, evaluations, converged })
}

/// Uniform Dirichlet draw per group, as normalized exponentials.
pub fn random_start(rng: &mut ChaCha8Rng, groups: &[usize]) -> Vec<f64> {
    let mut w = Vec::new();
    for &g in groups {
        let e: Vec<f64> = (0..g).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let s: f64 = e.iter().sum();
        w.extend(e.iter().map(|x| x / s));
    }
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStartResult {
    pub best: GdResult,
    pub best_start: usize,
    pub runs: Vec<GdResult>,
}

/// Run `cfg.restarts` descents; start `i` is drawn with seed `cfg.seed + i`,
/// except that `init`, when given, replaces start 0.
pub fn multi_start(
    f: &Objective<'_>,
    cfg: &SearchConfig,
    groups: &[usize],
    init: Option<&[f64]>,
) -> Result<MultiStartResult> {
    let starts: Vec<Vec<f64>> = (0..cfg.restarts)
        .map(|i| match (i, init) {
            (0, Some(w)) => w.to_vec(),
            _ => random_start(&mut ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(i as u64)), groups),
        })
        .collect();
    let runs: Vec<GdResult> = starts
        .par_iter()
        .map(|s| gd_search(f, cfg, s, groups))
        .collect::<Result<_>>()?;
    let best_start = (0..runs.len())
        .min_by(|&a, &b| runs[a].f.total_cmp(&runs[b].f).then(a.cmp(&b)))
        .expect("at least one restart");
    Ok(MultiStartResult { best: runs[best_start].clone(), best_start, runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(target: Vec<f64>) -> impl Fn(&[f64]) -> Result<f64> + Sync {
        move |w: &[f64]| Ok(w.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum())
    }

    #[test]
    fn gradient_of_quadratic() {
        let f = |w: &[f64]| -> Result<f64> { Ok(w.iter().map(|x| x * x).sum()) };
        let g = estimate_gradient(&f, &[0.25, 0.25], 1e-4, &[2]).unwrap();
        assert!(g.iter().all(|x| (x - 0.5).abs() < 1e-6));
    }

    #[test]
    fn gradient_of_constant_and_linear() {
        let c = |_: &[f64]| -> Result<f64> { Ok(3.0) };
        let g = estimate_gradient(&c, &[0.2, 0.3], 1e-3, &[2]).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-12));
        let lin = |w: &[f64]| -> Result<f64> { Ok(2.0 * w[0] - 3.0 * w[1]) };
        let g = estimate_gradient(&lin, &[0.2, 0.3], 1e-3, &[2]).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-9 && (g[1] + 3.0).abs() < 1e-9);
    }

    #[test]
    fn stationary_start_stays() {
        let target = vec![0.2, 0.3, 0.4];
        let f = quad(target.clone());
        let r = gd_search(&f, &SearchConfig::default(), &target, &[3]).unwrap();
        assert_eq!(r.w, target);
        assert_eq!(r.f, 0.0);
    }

    #[test]
    fn zero_beta_is_plain_projected_step() {
        let f = quad(vec![0.1, 0.7]);
        let cfg = SearchConfig { beta: 0.0, steps: 5, tol: 0.0, ..Default::default() };
        let r = gd_search(&f, &cfg, &[0.5, 0.5], &[2]).unwrap();
        let mut w = vec![0.5, 0.5];
        for p in &r.trace[1..] {
            let g = estimate_gradient(&f, &w, cfg.h, &[2]).unwrap();
            let step: Vec<f64> = w.iter().zip(&g).map(|(x, gi)| x - cfg.eta * gi).collect();
            w = project_constraints(&step, &[2]);
            assert_eq!(p.w, w);
        }
    }

    #[test]
    fn never_returns_worse_than_trace() {
        let f = quad(vec![0.2, 0.3, 0.5]);
        let cfg = SearchConfig { normalization: Normalization::Parameter, ..Default::default() };
        let r = gd_search(&f, &cfg, &[0.1, 0.1, 0.1], &[3]).unwrap();
        assert!(r.trace.iter().all(|p| r.f <= p.f));
    }

    #[test]
    fn single_restart_equals_descent() {
        let f = quad(vec![0.2, 0.3, 0.5]);
        let cfg = SearchConfig { restarts: 1, ..Default::default() };
        let ms = multi_start(&f, &cfg, &[3], None).unwrap();
        let start = random_start(&mut ChaCha8Rng::seed_from_u64(cfg.seed), &[3]);
        assert_eq!(ms.best, gd_search(&f, &cfg, &start, &[3]).unwrap());
    }

    #[test]
    fn random_starts_are_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let w = random_start(&mut rng, &[3, 4]);
            assert!(super::super::projection::is_feasible(&w, &[3, 4], 1e-12));
        }
    }
}
