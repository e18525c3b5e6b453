//! Two-level system topology: nodes inside a package, packages in the system.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::units::{de_opt_f64, de_u64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Mesh,
    Torus,
    Crossbar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    #[serde(rename = "topology")]
    pub kind: TopologyKind,
    /// Extent per dimension, x first. A crossbar has a single entry.
    pub dims: Vec<u64>,
    /// Bits/s per physical link; filled from the generated architecture when absent.
    #[serde(
        default,
        deserialize_with = "de_opt_f64",
        skip_serializing_if = "Option::is_none"
    )]
    pub link_bandwidth: Option<f64>,
    /// Seconds per hop; filled from the technology library when absent.
    #[serde(
        default,
        deserialize_with = "de_opt_f64",
        skip_serializing_if = "Option::is_none"
    )]
    pub link_latency: Option<f64>,
}

impl Topology {
    pub fn new(kind: TopologyKind, dims: Vec<u64>) -> Self {
        Self { kind, dims, link_bandwidth: None, link_latency: None }
    }

    pub fn size(&self) -> u64 {
        self.dims.iter().product()
    }

    /// Row-major coordinates, first dimension varying fastest.
    pub fn coords(&self, mut id: u64) -> Vec<u64> {
        self.dims
            .iter()
            .map(|&d| {
                let c = id % d;
                id /= d;
                c
            })
            .collect()
    }

    pub fn id(&self, coords: &[u64]) -> u64 {
        coords
            .iter()
            .zip(&self.dims)
            .rev()
            .fold(0, |acc, (&c, &d)| acc * d + c)
    }

    /// Physical links leaving one node, used to split aggregate node bandwidth.
    pub fn ports(&self) -> u64 {
        let p = match self.kind {
            TopologyKind::Crossbar => self.size().saturating_sub(1),
            TopologyKind::Mesh => self.dims.iter().filter(|&&d| d > 1).count() as u64 * 2,
            TopologyKind::Torus => self
                .dims
                .iter()
                .map(|&d| match d {
                    1 => 0,
                    2 => 1,
                    _ => 2,
                })
                .sum(),
        };
        p.max(1)
    }

    fn validate(&self, ctx: &str, expected: u64) -> Result<(), ConfigError> {
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(ConfigError::Invalid {
                field: format!("{ctx}.dims"),
                reason: "dimensions must be non-empty and >= 1".into(),
            });
        }
        if self.kind == TopologyKind::Crossbar && self.dims.len() != 1 {
            return Err(ConfigError::Invalid {
                field: format!("{ctx}.dims"),
                reason: "a crossbar takes a single extent".into(),
            });
        }
        if self.size() != expected {
            return Err(ConfigError::Constraint(format!(
                "{ctx}: product of dims {:?} is {} but {} nodes are declared",
                self.dims,
                self.size(),
                expected
            )));
        }
        for (f, v) in [("link_bandwidth", self.link_bandwidth), ("link_latency", self.link_latency)] {
            if let Some(v) = v {
                let ok = if f == "link_latency" { v >= 0.0 } else { v > 0.0 };
                if !ok {
                    return Err(ConfigError::Invalid {
                        field: format!("{ctx}.{f}"),
                        reason: format!("got {v}"),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemGraph {
    #[serde(deserialize_with = "de_u64")]
    pub num_packages: u64,
    #[serde(deserialize_with = "de_u64")]
    pub nodes_per_package: u64,
    pub intra: Topology,
    pub inter: Topology,
}

impl SystemGraph {
    pub fn total_nodes(&self) -> u64 {
        self.num_packages * self.nodes_per_package
    }

    /// A single package holding one node.
    pub fn single_node() -> Self {
        Self::mesh2d(1, 1, 1, 1)
    }

    /// Tori at both levels with the given dims.
    pub fn torus(intra: Vec<u64>, inter: Vec<u64>) -> Self {
        Self {
            num_packages: inter.iter().product(),
            nodes_per_package: intra.iter().product(),
            intra: Topology::new(TopologyKind::Torus, intra),
            inter: Topology::new(TopologyKind::Torus, inter),
        }
    }

    /// One package containing an `x` by `y` mesh, or packages arranged in a mesh.
    pub fn mesh2d(ix: u64, iy: u64, px: u64, py: u64) -> Self {
        Self {
            num_packages: px * py,
            nodes_per_package: ix * iy,
            intra: Topology::new(TopologyKind::Mesh, vec![ix, iy]),
            inter: Topology::new(TopologyKind::Mesh, vec![px, py]),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_packages == 0 || self.nodes_per_package == 0 {
            return Err(ConfigError::Invalid {
                field: "system".into(),
                reason: "num_packages and nodes_per_package must be >= 1".into(),
            });
        }
        self.intra.validate("system.intra", self.nodes_per_package)?;
        self.inter.validate("system.inter", self.num_packages)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coords_round_trip() {
        let t = Topology::new(TopologyKind::Mesh, vec![4, 3, 2]);
        for id in 0..t.size() {
            assert_eq!(t.id(&t.coords(id)), id);
        }
        assert_eq!(t.coords(5), vec![1, 1, 0]);
    }

    #[test]
    fn dims_must_match_counts() {
        let mut s = SystemGraph::torus(vec![4, 2], vec![8, 8]);
        assert!(s.validate().is_ok());
        s.nodes_per_package = 4;
        assert!(s.validate().is_err());
    }

    #[test]
    fn ports_per_kind() {
        assert_eq!(Topology::new(TopologyKind::Torus, vec![4, 2]).ports(), 3);
        assert_eq!(Topology::new(TopologyKind::Mesh, vec![4, 4]).ports(), 4);
        assert_eq!(Topology::new(TopologyKind::Crossbar, vec![8]).ports(), 7);
        assert_eq!(Topology::new(TopologyKind::Mesh, vec![1, 1]).ports(), 1);
    }
}
