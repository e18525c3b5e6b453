//! Random multi-level tiling search.
//!
//! Each on-chip level gets `N` capacity-feasible tile candidates nested inside
//! the tile chosen for the level above, so `N^L` tilings are evaluated for `L`
//! levels. The best tiling minimizes roofline kernel time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataflow::{reg_accesses, reuse_factor, Tile};
use super::roofline::{kernel_time, RooflineProfile};
use crate::arch::ArchSpec;
use crate::config::Dataflow;
use crate::error::PerfError;
use crate::graph::Dims;

/// Sample attempts allowed per requested candidate.
pub const REJECTION_CAP: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilingResult {
    /// Registers first.
    pub tiles: Vec<Tile>,
    /// Bytes per cache level then main memory.
    pub accesses: Vec<u64>,
    pub reuse: u64,
    pub dataflow: Dataflow,
    pub candidates_evaluated: u64,
    pub profile: RooflineProfile,
}

fn sum_ceil(total: u64, block: u64, inner: u64) -> u128 {
    let q = (total / block) as u128;
    let r = total % block;
    q * block.div_ceil(inner) as u128 + if r > 0 { r.div_ceil(inner) as u128 } else { 0 }
}

/// Elements moved from the level holding `outer` tiles into the level holding
/// `inner` tiles, summed over the whole kernel.
///
/// Every A element is re-read once per column tile, every B element once per
/// row tile, and every C element is written once and read back and rewritten
/// for each further reduction tile.
pub fn level_traffic(kernel: &Dims, outer: &Tile, inner: &Tile) -> u128 {
    let (m, n, k) = (kernel.m as u128, kernel.n as u128, kernel.k as u128);
    let a = m * k * sum_ceil(kernel.n, outer.y, inner.y);
    let b = k * n * sum_ceil(kernel.m, outer.x, inner.x);
    let zt = sum_ceil(kernel.k, outer.z, inner.z);
    let z_blocks = kernel.k.div_ceil(outer.z) as u128;
    let c = m * n * (2 * zt - z_blocks);
    a + b + c
}

pub fn compulsory_elems(d: &Dims) -> u128 {
    d.a_elems() as u128 + d.b_elems() as u128 + d.c_elems() as u128
}

fn sat(v: u128) -> u64 {
    u64::try_from(v).unwrap_or(u64::MAX)
}

/// Per-level byte counts for a complete tiling (registers first).
pub fn access_counts(
    dims: &Dims,
    tiles: &[Tile],
    arch: &ArchSpec,
    precision: u64,
) -> (Vec<u64>, u64, Dataflow) {
    let p = precision as u128;
    let flops = dims.gemm_flops().unwrap_or(u64::MAX);
    let full = Tile::new(dims.m, dims.n, dims.k);
    if tiles.is_empty() {
        return (vec![sat(compulsory_elems(dims) * p)], 1, arch.mcu.dataflow);
    }
    let t0 = tiles[0];
    let nx = arch.mcu.array_x.min(t0.x);
    let ny = arch.mcu.array_y.min(t0.y);
    let (k, df) = reuse_factor(t0, nx, ny, arch.mcu.dataflow);
    let regs = (reg_accesses(flops, k, nx, ny) as u128).max(compulsory_elems(dims));
    let mut out = Vec::with_capacity(tiles.len() + 1);
    out.push(sat(regs * p));
    for l in 1..tiles.len() {
        out.push(sat(level_traffic(dims, &tiles[l], &tiles[l - 1]) * p));
    }
    out.push(sat(level_traffic(dims, &full, &tiles[tiles.len() - 1]) * p));
    (out, k, df)
}

fn mix(seed: u64, d: &Dims, prec: u64) -> u64 {
    // splitmix64 over the kernel shape so equal kernels draw equal samples.
    let mut h = seed;
    for v in [d.m, d.n, d.k, prec] {
        h = h.wrapping_add(v).wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

struct Sampler<'a> {
    rng: ChaCha8Rng,
    caps: Vec<f64>,
    granule: Tile,
    samples: usize,
    prec: u64,
    _arch: &'a ArchSpec,
}

impl Sampler<'_> {
    fn fits(&self, level: usize, t: &Tile) -> bool {
        (t.working_set() as f64) * self.prec as f64 <= self.caps[level]
    }

    fn draw(&mut self, lo: u64, hi: u64, g: u64) -> u64 {
        if lo >= hi {
            return hi;
        }
        let v: f64 = self.rng.gen_range((lo as f64).ln()..=(hi as f64).ln()).exp();
        let r = ((v / g as f64).round() as u64).saturating_mul(g);
        r.clamp(lo, hi)
    }

    /// Up to `samples` distinct feasible tiles nested in `parent`.
    fn candidates(&mut self, level: usize, parent: &Tile) -> Vec<Tile> {
        let g = self.granule;
        let min = Tile::new(g.x.min(parent.x), g.y.min(parent.y), g.z.min(parent.z));
        let mut out: Vec<Tile> = Vec::with_capacity(self.samples);
        for t in [*parent, min] {
            if out.len() < self.samples && self.fits(level, &t) && !out.contains(&t) {
                out.push(t);
            }
        }
        let mut attempts = 0;
        while out.len() < self.samples && attempts < REJECTION_CAP * self.samples {
            attempts += 1;
            let t = Tile::new(
                self.draw(min.x, parent.x, g.x),
                self.draw(min.y, parent.y, g.y),
                self.draw(min.z, parent.z, g.z),
            );
            if self.fits(level, &t) && !out.contains(&t) {
                out.push(t);
            }
        }
        out
    }
}

/// Best sampled tiling for one GEMM.
pub fn search_tilings(
    dims: &Dims,
    elementwise_flops: u64,
    precision: u64,
    arch: &ArchSpec,
    samples: usize,
    seed: u64,
) -> Result<TilingResult, PerfError> {
    let compulsory = compulsory_elems(dims) as f64 * precision as f64;
    if compulsory > arch.main_mem_bytes() {
        return Err(PerfError::Capacity(format!(
            "kernel ({}, {}, {}) needs {compulsory} bytes but main memory holds {}",
            dims.m,
            dims.n,
            dims.k,
            arch.main_mem_bytes()
        )));
    }
    let flops = dims.gemm_flops().unwrap_or(u64::MAX).saturating_add(elementwise_flops);
    let levels = arch.mem_levels.len();
    if levels == 0 {
        let (acc, k, df) = access_counts(dims, &[], arch, precision);
        return Ok(TilingResult {
            profile: kernel_time(flops, arch, &acc),
            tiles: vec![],
            accesses: acc,
            reuse: k,
            dataflow: df,
            candidates_evaluated: 1,
        });
    }
    let mut s = Sampler {
        rng: ChaCha8Rng::seed_from_u64(mix(seed, dims, precision)),
        caps: arch.mem_levels.iter().map(|l| l.instance_bytes()).collect(),
        granule: Tile::new(arch.mcu.array_x, arch.mcu.array_y, arch.mcu.array_x),
        samples: samples.max(1),
        prec: precision,
        _arch: arch,
    };
    let full = Tile::new(dims.m, dims.n, dims.k);
    let mut search = Search {
        dims,
        arch,
        precision,
        flops,
        chosen: vec![full; levels],
        best: None,
        best_time: f64::INFINITY,
        evaluated: 0,
    };
    search.descend(&mut s, levels - 1, full, 0.0);
    let tiles = search.best.ok_or_else(|| {
        PerfError::Capacity(format!(
            "no tile of kernel ({}, {}, {}) fits the on-chip levels",
            dims.m, dims.n, dims.k
        ))
    })?;
    let (acc, k, df) = access_counts(dims, &tiles, arch, precision);
    Ok(TilingResult {
        profile: kernel_time(flops, arch, &acc),
        tiles,
        accesses: acc,
        reuse: k,
        dataflow: df,
        candidates_evaluated: search.evaluated,
    })
}

struct Search<'a> {
    dims: &'a Dims,
    arch: &'a ArchSpec,
    precision: u64,
    flops: u64,
    chosen: Vec<Tile>,
    best: Option<Vec<Tile>>,
    best_time: f64,
    evaluated: u64,
}

impl Search<'_> {
    fn level_time(&self, idx: usize, bytes: u128) -> f64 {
        let bw = if idx == self.arch.mem_levels.len() {
            self.arch.main_mem.bandwidth
        } else {
            self.arch.mem_levels[idx].bandwidth
        };
        if bytes == 0 {
            0.0
        } else {
            bytes as f64 * 8.0 / bw
        }
    }

    /// Choose the tile of `level` inside `parent`; `partial` is the slowest term fixed so far.
    fn descend(&mut self, s: &mut Sampler<'_>, level: usize, parent: Tile, partial: f64) {
        let top = self.arch.mem_levels.len() - 1;
        for t in s.candidates(level, &parent) {
            // Traffic into this level from the one above.
            let above = if level == top {
                Tile::new(self.dims.m, self.dims.n, self.dims.k)
            } else {
                parent
            };
            let bytes = level_traffic(self.dims, &above, &t) * self.precision as u128;
            let p = partial.max(self.level_time(level + 1, bytes));
            if p >= self.best_time {
                continue;
            }
            self.chosen[level] = t;
            if level == 0 {
                self.evaluated += 1;
                let (acc, _, _) = access_counts(self.dims, &self.chosen, self.arch, self.precision);
                let time = kernel_time(self.flops, self.arch, &acc).kernel_time;
                if time < self.best_time {
                    self.best_time = time;
                    self.best = Some(self.chosen.clone());
                }
            } else {
                self.descend(s, level - 1, t, p);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_tile_is_compulsory() {
        let d = Dims::new(30, 20, 10);
        let full = Tile::new(30, 20, 10);
        assert_eq!(level_traffic(&d, &full, &full), compulsory_elems(&d));
    }

    #[test]
    fn classic_tiled_gemm_traffic() {
        // 4x4x4 tiles of a 16^3 kernel: A and B re-read 4 times, C cycled 2*4-1 times.
        let d = Dims::new(16, 16, 16);
        let t = level_traffic(&d, &Tile::new(16, 16, 16), &Tile::new(4, 4, 4));
        assert_eq!(t, 256 * 4 + 256 * 4 + 256 * 7);
    }

    #[test]
    fn remainder_tiles_counted_exactly() {
        let d = Dims::new(10, 10, 10);
        let t = level_traffic(&d, &Tile::new(10, 10, 10), &Tile::new(4, 4, 4));
        // ceil(10/4) = 3 tiles along each axis.
        assert_eq!(t, 100 * 3 + 100 * 3 + 100 * 5);
    }
}
