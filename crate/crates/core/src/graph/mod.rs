//! Compute graphs of GEMM kernels and their parallel expansion.

pub mod export;
pub mod transform;

use serde::{Deserialize, Serialize};

pub use transform::{
    part, transform, CrossRole, DeviceCoord, EdgeKind, EdgeOrigin, Shard, ShardId, SuperEdge,
    SuperGraph,
};

use crate::config::{LmSpec, MlpSpec, ModelKind, ModelSpec};
use crate::error::GraphError;

/// Elementwise flops per gate element of an LSTM cell (activations and state update).
pub const LSTM_ELEMENTWISE_FLOPS_PER_GATE: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    GemmFwd,
    GemmBwdInput,
    GemmBwdWeight,
    Elementwise,
}

impl NodeKind {
    pub fn is_forward(self) -> bool {
        matches!(self, NodeKind::GemmFwd | NodeKind::Elementwise)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    M,
    N,
    K,
}

/// GEMM extents: `C[m, n] += A[m, k] * B[k, n]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub m: u64,
    pub n: u64,
    pub k: u64,
}

impl Dims {
    pub fn new(m: u64, n: u64, k: u64) -> Self {
        Self { m, n, k }
    }

    pub fn get(&self, a: Axis) -> u64 {
        match a {
            Axis::M => self.m,
            Axis::N => self.n,
            Axis::K => self.k,
        }
    }

    pub fn set(&mut self, a: Axis, v: u64) {
        match a {
            Axis::M => self.m = v,
            Axis::N => self.n = v,
            Axis::K => self.k = v,
        }
    }

    pub fn a_elems(&self) -> u64 {
        self.m * self.k
    }

    pub fn b_elems(&self) -> u64 {
        self.k * self.n
    }

    pub fn c_elems(&self) -> u64 {
        self.m * self.n
    }

    /// `2 m n k`, or `None` on overflow.
    pub fn gemm_flops(&self) -> Option<u64> {
        2u64.checked_mul(self.m)?
            .checked_mul(self.n)?
            .checked_mul(self.k)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelNode {
    pub id: usize,
    pub name: String,
    pub kind: NodeKind,
    pub dims: Dims,
    pub flops: u64,
    /// Non-GEMM work folded into this kernel.
    pub elementwise_flops: u64,
    pub bytes_in: u64,
    pub bytes_out: u64,
    /// Pipeline unit this kernel belongs to.
    pub layer: u64,
    /// Axis that carries the batch and is split by data parallelism.
    pub batch_axis: Axis,
    pub precision_bytes: u64,
}

impl KernelNode {
    #[allow(clippy::too_many_arguments)]
    pub fn gemm(
        id: usize,
        name: impl Into<String>,
        kind: NodeKind,
        dims: Dims,
        layer: u64,
        batch_axis: Axis,
        precision_bytes: u64,
        elementwise_flops: u64,
    ) -> Result<Self, GraphError> {
        let name = name.into();
        if dims.m == 0 || dims.n == 0 || dims.k == 0 {
            return Err(GraphError::InvalidDim(format!("{name}: {dims:?}")));
        }
        let flops = dims
            .gemm_flops()
            .ok_or_else(|| GraphError::Overflow(name.clone()))?;
        let bytes = |e: u64| e.checked_mul(precision_bytes);
        let bytes_in = dims
            .a_elems()
            .checked_add(dims.b_elems())
            .and_then(bytes)
            .ok_or_else(|| GraphError::Overflow(name.clone()))?;
        let bytes_out = bytes(dims.c_elems()).ok_or_else(|| GraphError::Overflow(name.clone()))?;
        Ok(Self {
            id,
            name,
            kind,
            dims,
            flops,
            elementwise_flops,
            bytes_in,
            bytes_out,
            layer,
            batch_axis,
            precision_bytes,
        })
    }

    /// Elements of the trainable tensor this kernel reads or produces.
    pub fn weight_elems(&self) -> u64 {
        match self.kind {
            NodeKind::GemmBwdWeight => self.dims.c_elems(),
            _ => self.dims.b_elems(),
        }
    }

    pub fn total_flops(&self) -> u64 {
        self.flops + self.elementwise_flops
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComputeGraph {
    pub nodes: Vec<KernelNode>,
    pub edges: Vec<Edge>,
    /// Pipeline units; every node's `layer` is below this.
    pub num_layers: u64,
    pub precision_bytes: u64,
}

struct Builder {
    nodes: Vec<KernelNode>,
    edges: Vec<Edge>,
    prec: u64,
}

impl Builder {
    fn new(prec: u64) -> Self {
        Self { nodes: Vec::new(), edges: Vec::new(), prec }
    }

    fn node(
        &mut self,
        name: String,
        kind: NodeKind,
        dims: Dims,
        layer: u64,
        batch: Axis,
        extra: u64,
    ) -> Result<usize, GraphError> {
        let id = self.nodes.len();
        self.nodes
            .push(KernelNode::gemm(id, name, kind, dims, layer, batch, self.prec, extra)?);
        Ok(id)
    }

    fn edge(&mut self, src: usize, dst: usize, elems: u64) -> Result<(), GraphError> {
        let bytes = elems
            .checked_mul(self.prec)
            .ok_or_else(|| GraphError::Overflow("edge bytes".into()))?;
        self.edges.push(Edge { src, dst, bytes });
        Ok(())
    }

    /// Grad-input `(m, k, n)` and grad-weight `(k, n, m)` for forward node `f`.
    fn backward(&mut self, f: usize, extra: u64) -> Result<(usize, usize), GraphError> {
        let (d, layer, base) = {
            let n = &self.nodes[f];
            (n.dims, n.layer, n.name.clone())
        };
        let bi = self.node(
            format!("{base}.bwd_input"),
            NodeKind::GemmBwdInput,
            Dims::new(d.m, d.k, d.n),
            layer,
            Axis::M,
            extra,
        )?;
        let bw = self.node(
            format!("{base}.bwd_weight"),
            NodeKind::GemmBwdWeight,
            Dims::new(d.k, d.n, d.m),
            layer,
            Axis::K,
            0,
        )?;
        Ok((bi, bw))
    }

    fn finish(self, num_layers: u64) -> Result<ComputeGraph, GraphError> {
        let g = ComputeGraph {
            nodes: self.nodes,
            edges: self.edges,
            num_layers,
            precision_bytes: self.prec,
        };
        g.topo_order()?;
        Ok(g)
    }
}

impl ComputeGraph {
    /// A single GEMM kernel.
    pub fn gemm(m: u64, n: u64, k: u64, precision_bytes: u64) -> Result<Self, GraphError> {
        let mut b = Builder::new(precision_bytes);
        b.node("gemm".into(), NodeKind::GemmFwd, Dims::new(m, n, k), 0, Axis::M, 0)?;
        b.finish(1)
    }

    /// Stacked LSTM layers followed by a vocabulary projection, with backward pass.
    pub fn lstm_lm(spec: &LmSpec, precision_bytes: u64) -> Result<Self, GraphError> {
        let (h, v, l) = (spec.hidden_dim, spec.vocab_size, spec.num_layers);
        if h == 0 || v == 0 || l == 0 || spec.batch_size == 0 || spec.seq_len == 0 {
            return Err(GraphError::InvalidDim("language model dims must be >= 1".into()));
        }
        let m = spec
            .batch_size
            .checked_mul(spec.seq_len)
            .ok_or_else(|| GraphError::Overflow("batch x seq".into()))?;
        let gates = m * 4 * h * LSTM_ELEMENTWISE_FLOPS_PER_GATE;
        let mut b = Builder::new(precision_bytes);
        let mut fwd = Vec::new();
        for i in 0..l {
            let id = b.node(
                format!("lstm{i}"),
                NodeKind::GemmFwd,
                Dims::new(m, 4 * h, 2 * h),
                i,
                Axis::M,
                gates,
            )?;
            if let Some(&prev) = fwd.last() {
                b.edge(prev, id, m * h)?;
            }
            fwd.push(id);
        }
        let last = l - 1;
        let top = *fwd.last().expect("at least one layer");
        let proj = b.node("proj".into(), NodeKind::GemmFwd, Dims::new(m, v, h), last, Axis::M, 0)?;
        b.edge(top, proj, m * h)?;
        let (pbi, pbw) = b.backward(proj, 0)?;
        b.edge(proj, pbi, m * v)?;
        b.edge(proj, pbw, m * v)?;
        b.edge(top, pbw, m * h)?;
        let mut grad = pbi;
        for i in (0..l as usize).rev() {
            let (bi, bw) = b.backward(fwd[i], gates)?;
            b.edge(grad, bi, m * h)?;
            b.edge(grad, bw, m * h)?;
            b.edge(fwd[i], bw, m * 2 * h)?;
            grad = bi;
        }
        b.finish(l)
    }

    /// Plain feed-forward stack; `widths[i] -> widths[i + 1]` per layer.
    pub fn feed_forward(spec: &MlpSpec, precision_bytes: u64) -> Result<Self, GraphError> {
        if spec.widths.len() < 2 {
            return Err(GraphError::InvalidDim("need at least two widths".into()));
        }
        let bsz = spec.batch_size;
        let layers = spec.widths.len() as u64 - 1;
        let mut b = Builder::new(precision_bytes);
        let mut fwd = Vec::new();
        for (i, w) in spec.widths.windows(2).enumerate() {
            let id = b.node(
                format!("fc{i}"),
                NodeKind::GemmFwd,
                Dims::new(bsz, w[1], w[0]),
                i as u64,
                Axis::M,
                0,
            )?;
            if let Some(&prev) = fwd.last() {
                b.edge(prev, id, bsz * w[0])?;
            }
            fwd.push(id);
        }
        if spec.backward {
            let mut grad: Option<usize> = None;
            for (i, &f) in fwd.iter().enumerate().rev() {
                let (bi, bw) = b.backward(f, 0)?;
                let out = bsz * spec.widths[i + 1];
                match grad {
                    Some(g) => {
                        b.edge(g, bi, out)?;
                        b.edge(g, bw, out)?;
                    }
                    None => {
                        b.edge(f, bi, out)?;
                        b.edge(f, bw, out)?;
                    }
                }
                if i > 0 {
                    b.edge(fwd[i - 1], bw, bsz * spec.widths[i])?;
                }
                grad = Some(bi);
            }
        }
        b.finish(layers)
    }

    pub fn from_model(model: &ModelSpec) -> Result<Self, GraphError> {
        let missing = |s: &str| GraphError::InvalidDim(format!("model.{s} section missing"));
        match model.kind {
            ModelKind::Gemm => {
                let g = model.gemm.as_ref().ok_or_else(|| missing("gemm"))?;
                Self::gemm(g.m, g.n, g.k, model.precision_bytes)
            }
            ModelKind::Lm => Self::lstm_lm(
                model.lm.as_ref().ok_or_else(|| missing("lm"))?,
                model.precision_bytes,
            ),
            ModelKind::Mlp => Self::feed_forward(
                model.mlp.as_ref().ok_or_else(|| missing("mlp"))?,
                model.precision_bytes,
            ),
        }
    }

    /// Kahn order with lowest-id tie breaking.
    pub fn topo_order(&self) -> Result<Vec<usize>, GraphError> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        let mut succ = vec![Vec::new(); n];
        for e in &self.edges {
            if e.src >= n || e.dst >= n {
                return Err(GraphError::InvalidDim(format!(
                    "edge {} -> {} has a missing endpoint",
                    e.src, e.dst
                )));
            }
            indeg[e.dst] += 1;
            succ[e.src].push(e.dst);
        }
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &j in &succ[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        if order.len() == n {
            Ok(order)
        } else {
            Err(GraphError::Cycle)
        }
    }

    pub fn total_flops(&self) -> u64 {
        self.nodes.iter().map(|n| n.flops).sum()
    }

    pub fn forward_flops(&self) -> u64 {
        self.nodes
            .iter()
            .filter(|n| n.kind.is_forward())
            .map(|n| n.flops)
            .sum()
    }

    /// Nodes whose trainable tensor is all-reduced under data parallelism.
    pub fn weight_nodes(&self) -> Vec<usize> {
        let grads: Vec<usize> = self
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::GemmBwdWeight)
            .map(|n| n.id)
            .collect();
        if !grads.is_empty() {
            return grads;
        }
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::GemmFwd)
            .map(|n| n.id)
            .collect()
    }

    /// The graph for one of `micro` equal slices of the batch (largest slice).
    pub fn micro_batch(&self, micro: u64) -> Result<Self, GraphError> {
        if micro <= 1 {
            return Ok(self.clone());
        }
        let mut g = self.clone();
        for n in &mut g.nodes {
            let b = n.dims.get(n.batch_axis);
            if micro > b {
                return Err(GraphError::Infeasible(format!(
                    "{}: {micro} micro-batches exceed batch extent {b}",
                    n.name
                )));
            }
            let mut d = n.dims;
            d.set(n.batch_axis, part(b, micro, 0));
            let scaled_extra = part(n.elementwise_flops, micro, 0);
            *n = KernelNode::gemm(
                n.id,
                n.name.clone(),
                n.kind,
                d,
                n.layer,
                n.batch_axis,
                n.precision_bytes,
                scaled_extra,
            )?;
        }
        for e in &mut g.edges {
            e.bytes = part(e.bytes, micro, 0);
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lm(l: u64) -> LmSpec {
        LmSpec { hidden_dim: 64, batch_size: 8, vocab_size: 100, num_layers: l, seq_len: 5 }
    }

    #[test]
    fn gemm_graph() {
        let g = ComputeGraph::gemm(4096, 4096, 4096, 2).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert_eq!(g.nodes[0].flops, 2 * 4096u64.pow(3));
        assert_eq!(ComputeGraph::gemm(1, 1, 1, 2).unwrap().nodes[0].flops, 2);
        assert!(ComputeGraph::gemm(0, 4, 4, 2).is_err());
    }

    #[test]
    fn lm_node_count_and_volumes() {
        let g = ComputeGraph::lstm_lm(&lm(2), 2).unwrap();
        assert_eq!(g.nodes.len(), 9);
        let fwd = g.forward_flops();
        assert_eq!(g.total_flops() - fwd, 2 * fwd);
        let proj = g.nodes.iter().find(|n| n.name == "proj").unwrap();
        assert_eq!(proj.flops, 2 * 40 * 100 * 64);
        assert_eq!(g.weight_nodes().len(), 3);
    }

    #[test]
    fn feed_forward_forward_only() {
        let spec = MlpSpec { batch_size: 24, widths: vec![16, 16, 16, 16], backward: false };
        let g = ComputeGraph::feed_forward(&spec, 2).unwrap();
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.edges.len(), 2);
        assert_eq!(g.weight_nodes(), vec![0, 1, 2]);
        let full = ComputeGraph::feed_forward(&MlpSpec { backward: true, ..spec }, 2).unwrap();
        assert_eq!(full.nodes.len(), 9);
        full.topo_order().unwrap();
    }

    #[test]
    fn cycle_detected() {
        let mut g = ComputeGraph::feed_forward(
            &MlpSpec { batch_size: 4, widths: vec![4, 4, 4], backward: false },
            2,
        )
        .unwrap();
        g.edges.push(Edge { src: 1, dst: 0, bytes: 1 });
        assert_eq!(g.topo_order(), Err(GraphError::Cycle));
    }

    #[test]
    fn micro_batch_shrinks_batch_axis() {
        let g = ComputeGraph::lstm_lm(&lm(2), 2).unwrap();
        let mb = g.micro_batch(4).unwrap();
        for (a, b) in g.nodes.iter().zip(&mb.nodes) {
            assert_eq!(b.dims.get(b.batch_axis), a.dims.get(a.batch_axis).div_ceil(4));
        }
    }
}
