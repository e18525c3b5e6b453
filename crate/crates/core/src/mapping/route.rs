//! Dimension-ordered routing over the two-level topology.

use serde::{Deserialize, Serialize};

use crate::config::{SystemGraph, Topology, TopologyKind};
use crate::error::MappingError;

/// A directed physical link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "level")]
pub enum Link {
    /// Between two nodes of one package (local node ids).
    Intra { package: u64, from: u64, to: u64 },
    /// Between two packages (package ids).
    Inter { from: u64, to: u64 },
}

impl Link {
    pub fn is_inter(&self) -> bool {
        matches!(self, Link::Inter { .. })
    }
}

/// Hops from `a` to `b` inside one topology, full offset of each dimension in turn.
pub fn route_in(topo: &Topology, a: u64, b: u64) -> Result<Vec<(u64, u64)>, MappingError> {
    let n = topo.size();
    if a >= n || b >= n {
        return Err(MappingError::Routing(format!(
            "node {} outside a topology of {n} nodes",
            a.max(b)
        )));
    }
    if a == b {
        return Ok(Vec::new());
    }
    if topo.kind == TopologyKind::Crossbar {
        return Ok(vec![(a, b)]);
    }
    let target = topo.coords(b);
    let mut cur = topo.coords(a);
    let mut hops = Vec::new();
    for d in 0..topo.dims.len() {
        let ext = topo.dims[d];
        while cur[d] != target[d] {
            let step_up = match topo.kind {
                TopologyKind::Torus => {
                    let fwd = (target[d] + ext - cur[d]) % ext;
                    fwd <= ext - fwd
                }
                _ => target[d] > cur[d],
            };
            let from = topo.id(&cur);
            cur[d] = if step_up { (cur[d] + 1) % ext } else { (cur[d] + ext - 1) % ext };
            hops.push((from, topo.id(&cur)));
        }
    }
    Ok(hops)
}

/// Route between global node ids (`package * nodes_per_package + local`).
///
/// Traffic between packages leaves through local node 0 of the source package
/// and enters through local node 0 of the destination package.
pub fn route(a: u64, b: u64, sys: &SystemGraph) -> Result<Vec<Link>, MappingError> {
    let total = sys.total_nodes();
    if a >= total || b >= total {
        return Err(MappingError::Routing(format!(
            "node {} outside a system of {total} nodes",
            a.max(b)
        )));
    }
    let npp = sys.nodes_per_package;
    let (pa, la) = (a / npp, a % npp);
    let (pb, lb) = (b / npp, b % npp);
    let intra = |p: u64, x: u64, y: u64| -> Result<Vec<Link>, MappingError> {
        Ok(route_in(&sys.intra, x, y)?
            .into_iter()
            .map(|(from, to)| Link::Intra { package: p, from, to })
            .collect())
    };
    if pa == pb {
        return intra(pa, la, lb);
    }
    let mut links = intra(pa, la, 0)?;
    links.extend(
        route_in(&sys.inter, pa, pb)?
            .into_iter()
            .map(|(from, to)| Link::Inter { from, to }),
    );
    links.extend(intra(pb, 0, lb)?);
    Ok(links)
}

/// Endpoints of a link as global node ids.
pub fn link_endpoints(l: &Link, sys: &SystemGraph) -> (u64, u64) {
    let npp = sys.nodes_per_package;
    match *l {
        Link::Intra { package, from, to } => (package * npp + from, package * npp + to),
        Link::Inter { from, to } => (from * npp, to * npp),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh(x: u64, y: u64) -> SystemGraph {
        SystemGraph::mesh2d(x, y, 1, 1)
    }

    #[test]
    fn xy_on_mesh() {
        let s = mesh(4, 4);
        let id = |x: u64, y: u64| y * 4 + x;
        let r = route(id(0, 0), id(2, 1), &s).unwrap();
        let want: Vec<Link> = [((0, 0), (1, 0)), ((1, 0), (2, 0)), ((2, 0), (2, 1))]
            .iter()
            .map(|&((a, b), (c, d))| Link::Intra { package: 0, from: id(a, b), to: id(c, d) })
            .collect();
        assert_eq!(r, want);
    }

    #[test]
    fn torus_wraps() {
        let s = SystemGraph::torus(vec![4], vec![1]);
        assert_eq!(route(0, 3, &s).unwrap(), vec![Link::Intra { package: 0, from: 0, to: 3 }]);
        // Tie on an even ring goes the positive way.
        assert_eq!(route(0, 2, &s).unwrap().len(), 2);
        assert_eq!(route(0, 2, &s).unwrap()[0], Link::Intra { package: 0, from: 0, to: 1 });
    }

    #[test]
    fn self_route_is_empty() {
        assert!(route(0, 0, &mesh(4, 4)).unwrap().is_empty());
    }

    #[test]
    fn crossbar_single_hop() {
        let mut s = SystemGraph::single_node();
        s.nodes_per_package = 6;
        s.intra = Topology::new(TopologyKind::Crossbar, vec![6]);
        assert_eq!(route(1, 5, &s).unwrap(), vec![Link::Intra { package: 0, from: 1, to: 5 }]);
    }

    #[test]
    fn hierarchical_via_egress() {
        let s = SystemGraph::torus(vec![2, 2], vec![4]);
        // Node 3 of package 0 to node 1 of package 2.
        let r = route(3, 2 * 4 + 1, &s).unwrap();
        assert_eq!(r.iter().filter(|l| l.is_inter()).count(), 2);
        let (first, _) = link_endpoints(&r[0], &s);
        let (_, last) = link_endpoints(r.last().unwrap(), &s);
        assert_eq!((first, last), (3, 9));
        for w in r.windows(2) {
            assert_eq!(link_endpoints(&w[0], &s).1, link_endpoints(&w[1], &s).0);
        }
    }

    #[test]
    fn out_of_range_is_an_error() {
        assert!(route(0, 16, &mesh(4, 4)).is_err());
    }
}
