//! Register-level traffic of a systolic compute unit.

use serde::{Deserialize, Serialize};

use crate::config::Dataflow;

/// Tile extents: `x` along m, `y` along n, `z` along k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Tile {
    pub x: u64,
    pub y: u64,
    pub z: u64,
}

impl Tile {
    pub fn new(x: u64, y: u64, z: u64) -> Self {
        Self { x, y, z }
    }

    /// Elements of the three operand blocks resident at once.
    pub fn working_set(&self) -> u64 {
        self.x * self.z + self.z * self.y + self.x * self.y
    }

    pub fn fits_in(&self, outer: &Tile) -> bool {
        self.x <= outer.x && self.y <= outer.y && self.z <= outer.z
    }
}

/// Register-file accesses for `flops` of work with reuse `k` on an `nx` by `ny` array:
/// `ceil(flops (nx ny + k nx + k ny) / (2 k nx ny))`.
pub fn reg_accesses(flops: u64, k: u64, nx: u64, ny: u64) -> u64 {
    let (f, k, nx, ny) = (flops as u128, k as u128, nx as u128, ny as u128);
    let num = f * (nx * ny + k * nx + k * ny);
    let den = 2 * k * nx * ny;
    num.div_ceil(den) as u64
}

/// Accumulation depth standing in for the array's third extent.
pub fn nz_effective(tz: u64, nx: u64) -> u64 {
    tz.min(nx).max(1)
}

/// Reuse factor of each stationary choice, in the tie order used by `Auto`.
pub fn reuse_candidates(tile: Tile, nx: u64, ny: u64) -> [(Dataflow, u64); 3] {
    [
        (Dataflow::WeightStationary, tile.x.div_ceil(nx)),
        (Dataflow::ActivationStationary, tile.y.div_ceil(ny)),
        (Dataflow::OutputStationary, tile.z.div_ceil(nz_effective(tile.z, nx))),
    ]
}

/// Reuse factor `K` and the dataflow that achieves it.
pub fn reuse_factor(tile: Tile, nx: u64, ny: u64, dataflow: Dataflow) -> (u64, Dataflow) {
    let c = reuse_candidates(tile, nx, ny);
    let pick = |d: Dataflow| c.iter().find(|(x, _)| *x == d).map(|&(d, k)| (k.max(1), d));
    match dataflow {
        Dataflow::Auto => {
            let mut best = c[0];
            for &cand in &c[1..] {
                if cand.1 > best.1 {
                    best = cand;
                }
            }
            (best.1.max(1), best.0)
        }
        d => pick(d).expect("three fixed dataflows"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reg_access_examples() {
        assert_eq!(reg_accesses(2, 1, 1, 1), 3);
        assert_eq!(reg_accesses(1024, 4, 4, 4), 384);
        assert_eq!(reg_accesses(1024, 8, 8, 8), 192);
    }

    #[test]
    fn reuse_examples() {
        let (k, _) = reuse_factor(Tile::new(64, 64, 64), 8, 8, Dataflow::WeightStationary);
        assert_eq!(k, 8);
        for d in [
            Dataflow::WeightStationary,
            Dataflow::ActivationStationary,
            Dataflow::OutputStationary,
            Dataflow::Auto,
        ] {
            assert_eq!(reuse_factor(Tile::new(8, 8, 8), 8, 8, d).0, 1);
        }
        assert_eq!(
            reuse_factor(Tile::new(64, 16, 32), 8, 8, Dataflow::Auto),
            (8, Dataflow::WeightStationary)
        );
    }
}
