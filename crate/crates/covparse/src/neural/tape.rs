//! Reverse-mode gradients over a dynamically recorded operation tape.
//!
//! Values are computed eagerly as operations are recorded, so control flow
//! (which transition to take next) can read them mid-construction. Nodes
//! hold plain vectors; matrix parameters enter through dedicated ops that
//! reference the [`ParamStore`] instead of being copied onto the tape.

use super::tensor::{ParamId, ParamStore};

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    /// Constant leaf; no gradient flows out.
    Input,
    /// A whole vector parameter.
    Param(ParamId),
    /// One row of a matrix parameter (embedding lookup).
    Lookup { table: ParamId, row: usize },
    /// `W · x` for a matrix parameter W.
    MatVec { w: ParamId, x: NodeId },
    /// `x + b` for a vector parameter b.
    AddBias { x: NodeId, b: ParamId },
    Add { a: NodeId, b: NodeId },
    /// Elementwise product.
    Mul { a: NodeId, b: NodeId },
    Sigmoid { x: NodeId },
    Tanh { x: NodeId },
    Concat { xs: Vec<NodeId> },
    /// Scalar `x[pos] - x[neg]`.
    PickSub { x: NodeId, pos: usize, neg: usize },
    /// Scalar `max(0, x + shift)`.
    ReluPlus { x: NodeId },
    /// Scalar sum of scalar nodes.
    SumScalars { xs: Vec<NodeId> },
    /// Scalar `w · x` with a constant weight vector.
    DotConst { x: NodeId, w: Vec<f64> },
}

struct Node {
    op: Op,
    value: Vec<f64>,
}

/// The recorded computation of one example.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.nodes[id.0].value.len(), 1);
        self.nodes[id.0].value[0]
    }

    fn push(&mut self, op: Op, value: Vec<f64>) -> NodeId {
        debug_assert!(
            value.iter().all(|v| v.is_finite()),
            "non-finite value on the tape"
        );
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn input(&mut self, values: Vec<f64>) -> NodeId {
        self.push(Op::Input, values)
    }

    pub fn param(&mut self, store: &ParamStore, p: ParamId) -> NodeId {
        let value = store.get(p).values().to_vec();
        self.push(Op::Param(p), value)
    }

    pub fn lookup(&mut self, store: &ParamStore, table: ParamId, row: usize) -> NodeId {
        let value = store.get(table).row(row).to_vec();
        self.push(Op::Lookup { table, row }, value)
    }

    pub fn matvec(&mut self, store: &ParamStore, w: ParamId, x: NodeId) -> NodeId {
        let m = store.get(w);
        let xv = self.value(x);
        assert_eq!(
            m.cols(),
            xv.len(),
            "matvec: {} is {}x{} but the input has length {}",
            store.name(w),
            m.rows(),
            m.cols(),
            xv.len()
        );
        let mut out = vec![0.0; m.rows()];
        for (r, o) in out.iter_mut().enumerate() {
            let row = m.row(r);
            *o = row.iter().zip(xv).map(|(a, b)| a * b).sum();
        }
        self.push(Op::MatVec { w, x }, out)
    }

    pub fn add_bias(&mut self, store: &ParamStore, x: NodeId, b: ParamId) -> NodeId {
        let bv = store.get(b).values();
        let xv = self.value(x);
        assert_eq!(bv.len(), xv.len(), "bias length mismatch");
        let out = xv.iter().zip(bv).map(|(a, b)| a + b).collect();
        self.push(Op::AddBias { x, b }, out)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.len(), bv.len(), "add length mismatch");
        let out = av.iter().zip(bv).map(|(x, y)| x + y).collect();
        self.push(Op::Add { a, b }, out)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.len(), bv.len(), "mul length mismatch");
        let out = av.iter().zip(bv).map(|(x, y)| x * y).collect();
        self.push(Op::Mul { a, b }, out)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let out = self
            .value(x)
            .iter()
            .map(|v| 1.0 / (1.0 + (-v).exp()))
            .collect();
        self.push(Op::Sigmoid { x }, out)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).iter().map(|v| v.tanh()).collect();
        self.push(Op::Tanh { x }, out)
    }

    pub fn concat(&mut self, xs: &[NodeId]) -> NodeId {
        let mut out = Vec::new();
        for &x in xs {
            out.extend_from_slice(self.value(x));
        }
        self.push(Op::Concat { xs: xs.to_vec() }, out)
    }

    pub fn pick_sub(&mut self, x: NodeId, pos: usize, neg: usize) -> NodeId {
        let xv = self.value(x);
        let out = vec![xv[pos] - xv[neg]];
        self.push(Op::PickSub { x, pos, neg }, out)
    }

    pub fn relu_plus(&mut self, x: NodeId, shift: f64) -> NodeId {
        let v = self.scalar(x);
        let out = vec![(v + shift).max(0.0)];
        self.push(Op::ReluPlus { x }, out)
    }

    pub fn sum(&mut self, xs: &[NodeId]) -> NodeId {
        let total = xs.iter().map(|&x| self.scalar(x)).sum();
        self.push(Op::SumScalars { xs: xs.to_vec() }, vec![total])
    }

    pub fn dot_const(&mut self, x: NodeId, w: Vec<f64>) -> NodeId {
        let xv = self.value(x);
        assert_eq!(xv.len(), w.len(), "dot length mismatch");
        let out = vec![xv.iter().zip(&w).map(|(a, b)| a * b).sum()];
        self.push(Op::DotConst { x, w }, out)
    }

    /// Back-propagates from a scalar seed node, accumulating parameter
    /// gradients into the store. Node gradients are recomputed per call;
    /// parameter gradients accumulate across calls until cleared.
    pub fn backward(&self, seed: NodeId, store: &mut ParamStore) {
        assert_eq!(self.nodes[seed.0].value.len(), 1, "seed must be scalar");
        let mut grads: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|n| vec![0.0; n.value.len()])
            .collect();
        grads[seed.0][0] = 1.0;
        for idx in (0..=seed.0).rev() {
            // Parents always precede children on the tape.
            let (before, rest) = grads.split_at_mut(idx);
            let g = std::mem::take(&mut rest[0]);
            if g.iter().all(|&x| x == 0.0) {
                continue;
            }
            match &self.nodes[idx].op {
                Op::Input => {}
                Op::Param(p) => {
                    if let Some(pg) = store.get_mut(*p).grad_mut() {
                        for (pgv, gv) in pg.iter_mut().zip(&g) {
                            *pgv += gv;
                        }
                    }
                }
                Op::Lookup { table, row } => {
                    let cols = store.get(*table).cols();
                    if let Some(pg) = store.get_mut(*table).grad_mut() {
                        let start = row * cols;
                        for (k, gv) in g.iter().enumerate() {
                            pg[start + k] += gv;
                        }
                    }
                }
                Op::MatVec { w, x } => {
                    let xv = &self.nodes[x.0].value;
                    let cols = store.get(*w).cols();
                    // dW[r, :] += g[r] * x
                    if let Some(pg) = store.get_mut(*w).grad_mut() {
                        for (r, gr) in g.iter().enumerate() {
                            if *gr != 0.0 {
                                let rowg = &mut pg[r * cols..(r + 1) * cols];
                                for (pgv, xvv) in rowg.iter_mut().zip(xv) {
                                    *pgv += gr * xvv;
                                }
                            }
                        }
                    }
                    // dx += W^T g
                    let m = store.get(*w);
                    let dx = &mut before[x.0];
                    for (r, gr) in g.iter().enumerate() {
                        if *gr != 0.0 {
                            for (dxv, wv) in dx.iter_mut().zip(m.row(r)) {
                                *dxv += gr * wv;
                            }
                        }
                    }
                }
                Op::AddBias { x, b } => {
                    if let Some(pg) = store.get_mut(*b).grad_mut() {
                        for (pgv, gv) in pg.iter_mut().zip(&g) {
                            *pgv += gv;
                        }
                    }
                    for (dxv, gv) in before[x.0].iter_mut().zip(&g) {
                        *dxv += gv;
                    }
                }
                Op::Add { a, b } => {
                    for (dv, gv) in before[a.0].iter_mut().zip(&g) {
                        *dv += gv;
                    }
                    for (dv, gv) in before[b.0].iter_mut().zip(&g) {
                        *dv += gv;
                    }
                }
                Op::Mul { a, b } => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    for k in 0..g.len() {
                        before[a.0][k] += g[k] * bv[k];
                        before[b.0][k] += g[k] * av[k];
                    }
                }
                Op::Sigmoid { x } => {
                    let y = &self.nodes[idx].value;
                    for k in 0..g.len() {
                        before[x.0][k] += g[k] * y[k] * (1.0 - y[k]);
                    }
                }
                Op::Tanh { x } => {
                    let y = &self.nodes[idx].value;
                    for k in 0..g.len() {
                        before[x.0][k] += g[k] * (1.0 - y[k] * y[k]);
                    }
                }
                Op::Concat { xs } => {
                    let mut offset = 0;
                    for &x in xs {
                        let len = self.nodes[x.0].value.len();
                        for k in 0..len {
                            before[x.0][k] += g[offset + k];
                        }
                        offset += len;
                    }
                }
                Op::PickSub { x, pos, neg } => {
                    before[x.0][*pos] += g[0];
                    before[x.0][*neg] -= g[0];
                }
                Op::ReluPlus { x } => {
                    if self.nodes[idx].value[0] > 0.0 {
                        before[x.0][0] += g[0];
                    }
                }
                Op::SumScalars { xs } => {
                    for &x in xs {
                        before[x.0][0] += g[0];
                    }
                }
                Op::DotConst { x, w } => {
                    for (k, wv) in w.iter().enumerate() {
                        before[x.0][k] += g[0] * wv;
                    }
                }
            }
        }
    }
}
