//! Reverse-mode differentiation over a per-sentence expression graph.
//!
//! Nodes hold vectors. Parameters are referenced by id and read from the
//! borrowed [`ParamStore`] rather than copied in, so a graph is cheap to
//! build and is dropped after its backward pass.

use super::{GradSlot, Gradients, ParamId, ParamStore};
use crate::error::NumericError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    Row(ParamId, usize),
    Element(ParamId, usize),
    MatVec(ParamId, NodeId),
    Affine(Vec<(ParamId, NodeId)>, Option<ParamId>),
    Add(NodeId, NodeId),
    Sum(Vec<NodeId>),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Mask(NodeId, Vec<f64>),
    Concat(Vec<NodeId>),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Pick(NodeId, usize),
    AddConst(NodeId),
    Hinge(NodeId),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param(_) => "param",
            Op::Row(..) => "row",
            Op::Element(..) => "element",
            Op::MatVec(..) => "matvec",
            Op::Affine(..) => "affine",
            Op::Add(..) => "add",
            Op::Sum(_) => "sum",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Mask(..) => "mask",
            Op::Concat(_) => "concat",
            Op::Sigmoid(_) => "sigmoid",
            Op::Tanh(_) => "tanh",
            Op::Pick(..) => "pick",
            Op::AddConst(..) => "add_const",
            Op::Hinge(_) => "hinge",
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Vec<f64>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn shape_err(op: &'static str, detail: String) -> NumericError {
    NumericError::Shape { op, detail }
}

pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Graph<'p> {
        Graph {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
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

    /// Value of a one-element node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value[0]
    }

    fn dim(&self, id: NodeId) -> usize {
        self.nodes[id.0].value.len()
    }

    fn push(&mut self, op: Op, value: Vec<f64>) -> Result<NodeId, NumericError> {
        let id = self.nodes.len();
        if value.iter().any(|v| !v.is_finite()) {
            return Err(NumericError::NonFinite {
                node: id,
                op: op.name(),
            });
        }
        self.nodes.push(Node { op, value });
        Ok(NodeId(id))
    }

    fn same_dims(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<(), NumericError> {
        if self.dim(a) != self.dim(b) {
            return Err(shape_err(op, format!("{} vs {}", self.dim(a), self.dim(b))));
        }
        Ok(())
    }

    pub fn input(&mut self, value: Vec<f64>) -> Result<NodeId, NumericError> {
        self.push(Op::Input, value)
    }

    pub fn zeros(&mut self, len: usize) -> NodeId {
        self.push(Op::Input, vec![0.0; len]).expect("zeros are finite")
    }

    /// A whole parameter, flattened to a vector.
    pub fn param(&mut self, p: ParamId) -> Result<NodeId, NumericError> {
        let v = self.params.value(p).data().to_vec();
        self.push(Op::Param(p), v)
    }

    /// One row of a matrix parameter (embedding lookup).
    pub fn row(&mut self, p: ParamId, r: usize) -> Result<NodeId, NumericError> {
        let t = self.params.value(p);
        if t.rank() != 2 || r >= t.rows() {
            return Err(shape_err("row", format!("row {r} of {:?}", t.dims())));
        }
        let v = t.row(r).to_vec();
        self.push(Op::Row(p, r), v)
    }

    /// One element of a parameter, by flat index.
    pub fn element(&mut self, p: ParamId, idx: usize) -> Result<NodeId, NumericError> {
        let t = self.params.value(p);
        if idx >= t.len() {
            return Err(shape_err("element", format!("index {idx} of {:?}", t.dims())));
        }
        let v = vec![t.data()[idx]];
        self.push(Op::Element(p, idx), v)
    }

    fn check_matvec(&self, op: &'static str, p: ParamId, x: NodeId) -> Result<(), NumericError> {
        let w = self.params.value(p);
        if w.rank() != 2 || w.cols() != self.dim(x) {
            return Err(shape_err(op, format!("{:?} times vector of {}", w.dims(), self.dim(x))));
        }
        Ok(())
    }

    pub fn matvec(&mut self, p: ParamId, x: NodeId) -> Result<NodeId, NumericError> {
        self.check_matvec("matvec", p, x)?;
        let w = self.params.value(p);
        let mut out = vec![0.0; w.rows()];
        matvec_into(w.data(), w.cols(), &self.nodes[x.0].value, &mut out);
        self.push(Op::MatVec(p, x), out)
    }

    /// `sum_k W_k x_k + b`, accumulated in term order, bias last.
    pub fn affine(&mut self, terms: &[(ParamId, NodeId)], bias: Option<ParamId>) -> Result<NodeId, NumericError> {
        let rows = match (terms.first(), bias) {
            (Some(&(p, _)), _) => self.params.value(p).rows(),
            (None, Some(b)) => self.params.value(b).len(),
            (None, None) => return Err(shape_err("affine", "no terms".into())),
        };
        for &(p, x) in terms {
            self.check_matvec("affine", p, x)?;
            if self.params.value(p).rows() != rows {
                return Err(shape_err(
                    "affine",
                    format!("term with {} rows, expected {rows}", self.params.value(p).rows()),
                ));
            }
        }
        if let Some(b) = bias {
            if self.params.value(b).len() != rows {
                return Err(shape_err(
                    "affine",
                    format!("bias of {}, expected {rows}", self.params.value(b).len()),
                ));
            }
        }
        let mut out = vec![0.0; rows];
        for &(p, x) in terms {
            let w = self.params.value(p);
            matvec_into(w.data(), w.cols(), &self.nodes[x.0].value, &mut out);
        }
        if let Some(b) = bias {
            for (o, v) in out.iter_mut().zip(self.params.value(b).data()) {
                *o += v;
            }
        }
        self.push(Op::Affine(terms.to_vec(), bias), out)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericError> {
        self.same_dims("add", a, b)?;
        let v = zip_map(&self.nodes[a.0].value, &self.nodes[b.0].value, |x, y| x + y);
        self.push(Op::Add(a, b), v)
    }

    /// Sum of equally sized vectors, accumulated left to right. A singleton
    /// sum returns an exact copy of its input.
    pub fn sum(&mut self, xs: &[NodeId]) -> Result<NodeId, NumericError> {
        let Some(&first) = xs.first() else {
            return Err(shape_err("sum", "empty operand list".into()));
        };
        let mut acc = self.nodes[first.0].value.clone();
        for &x in &xs[1..] {
            self.same_dims("sum", first, x)?;
            for (a, v) in acc.iter_mut().zip(&self.nodes[x.0].value) {
                *a += v;
            }
        }
        self.push(Op::Sum(xs.to_vec()), acc)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericError> {
        self.same_dims("mul", a, b)?;
        let v = zip_map(&self.nodes[a.0].value, &self.nodes[b.0].value, |x, y| x * y);
        self.push(Op::Mul(a, b), v)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId, NumericError> {
        let v = self.nodes[a.0].value.iter().map(|x| c * x).collect();
        self.push(Op::Scale(a, c), v)
    }

    /// Elementwise product with a constant vector (dropout masks).
    pub fn mask(&mut self, a: NodeId, mask: Vec<f64>) -> Result<NodeId, NumericError> {
        if mask.len() != self.dim(a) {
            return Err(shape_err("mask", format!("{} vs {}", mask.len(), self.dim(a))));
        }
        let v = zip_map(&self.nodes[a.0].value, &mask, |x, m| x * m);
        self.push(Op::Mask(a, mask), v)
    }

    pub fn concat(&mut self, xs: &[NodeId]) -> Result<NodeId, NumericError> {
        if xs.is_empty() {
            return Err(shape_err("concat", "empty operand list".into()));
        }
        let mut v = Vec::with_capacity(xs.iter().map(|&x| self.dim(x)).sum());
        for &x in xs {
            v.extend_from_slice(&self.nodes[x.0].value);
        }
        self.push(Op::Concat(xs.to_vec()), v)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId, NumericError> {
        let v = self.nodes[a.0].value.iter().map(|&x| sigmoid(x)).collect();
        self.push(Op::Sigmoid(a), v)
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId, NumericError> {
        let v = self.nodes[a.0].value.iter().map(|x| x.tanh()).collect();
        self.push(Op::Tanh(a), v)
    }

    /// One component of a vector, as a scalar node.
    pub fn pick(&mut self, a: NodeId, idx: usize) -> Result<NodeId, NumericError> {
        if idx >= self.dim(a) {
            return Err(shape_err("pick", format!("index {idx} of {}", self.dim(a))));
        }
        let v = vec![self.nodes[a.0].value[idx]];
        self.push(Op::Pick(a, idx), v)
    }

    pub fn add_const(&mut self, a: NodeId, c: f64) -> Result<NodeId, NumericError> {
        let v = self.nodes[a.0].value.iter().map(|x| x + c).collect();
        self.push(Op::AddConst(a), v)
    }

    /// `max(0, x)` on a scalar; the gradient is passed only where `x > 0`.
    pub fn hinge(&mut self, a: NodeId) -> Result<NodeId, NumericError> {
        if self.dim(a) != 1 {
            return Err(shape_err("hinge", format!("expected scalar, got {}", self.dim(a))));
        }
        let v = vec![self.nodes[a.0].value[0].max(0.0)];
        self.push(Op::Hinge(a), v)
    }

    /// Gradients of the scalar `loss` with respect to every parameter the
    /// graph reads. Nodes are visited once, in reverse creation order.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, NumericError> {
        if self.dim(loss) != 1 {
            return Err(NumericError::NonScalarLoss(loss.0));
        }
        let store = self.params;
        let mut out = Gradients::new(store);
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        fn acc(grads: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut Vec<f64> {
            grads[id.0].get_or_insert_with(|| vec![0.0; len])
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if g.iter().any(|v| !v.is_finite()) {
                return Err(NumericError::NonFinite {
                    node: idx,
                    op: node.op.name(),
                });
            }
            match &node.op {
                Op::Input => {}
                Op::Param(p) => {
                    add_into(out.dense_mut(*p, store), &g);
                }
                Op::Row(p, r) => out.add_row(*p, *r, &g, store),
                Op::Element(p, i) => out.dense_mut(*p, store)[*i] += g[0],
                Op::MatVec(p, x) => {
                    let xv = &self.nodes[x.0].value;
                    matvec_backward(store, &mut out, *p, xv, &g, acc(&mut grads, *x, xv.len()));
                }
                Op::Affine(terms, bias) => {
                    for &(p, x) in terms {
                        let xv = &self.nodes[x.0].value;
                        matvec_backward(store, &mut out, p, xv, &g, acc(&mut grads, x, xv.len()));
                    }
                    if let Some(b) = bias {
                        add_into(out.dense_mut(*b, store), &g);
                    }
                }
                Op::Add(a, b) => {
                    add_into(acc(&mut grads, *a, g.len()), &g);
                    add_into(acc(&mut grads, *b, g.len()), &g);
                }
                Op::Sum(xs) => {
                    for &x in xs {
                        add_into(acc(&mut grads, x, g.len()), &g);
                    }
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let ga: Vec<f64> = g.iter().zip(vb).map(|(g, y)| g * y).collect();
                    let gb: Vec<f64> = g.iter().zip(va).map(|(g, x)| g * x).collect();
                    add_into(acc(&mut grads, *a, g.len()), &ga);
                    add_into(acc(&mut grads, *b, g.len()), &gb);
                }
                Op::Scale(a, c) => {
                    let t = acc(&mut grads, *a, g.len());
                    t.iter_mut().zip(&g).for_each(|(t, g)| *t += c * g);
                }
                Op::Mask(a, m) => {
                    let t = acc(&mut grads, *a, g.len());
                    t.iter_mut().zip(g.iter().zip(m)).for_each(|(t, (g, m))| *t += g * m);
                }
                Op::Concat(xs) => {
                    let mut off = 0;
                    for &x in xs {
                        let len = self.dim(x);
                        add_into(acc(&mut grads, x, len), &g[off..off + len]);
                        off += len;
                    }
                }
                Op::Sigmoid(a) => {
                    let t = acc(&mut grads, *a, g.len());
                    for ((t, g), y) in t.iter_mut().zip(&g).zip(&node.value) {
                        *t += g * y * (1.0 - y);
                    }
                }
                Op::Tanh(a) => {
                    let t = acc(&mut grads, *a, g.len());
                    for ((t, g), y) in t.iter_mut().zip(&g).zip(&node.value) {
                        *t += g * (1.0 - y * y);
                    }
                }
                Op::Pick(a, i) => {
                    let len = self.dim(*a);
                    acc(&mut grads, *a, len)[*i] += g[0];
                }
                Op::AddConst(a) => add_into(acc(&mut grads, *a, g.len()), &g),
                Op::Hinge(a) => {
                    if self.nodes[a.0].value[0] > 0.0 {
                        add_into(acc(&mut grads, *a, 1), &g);
                    }
                }
            }
        }
        for (idx, slot) in out.slots.iter().enumerate() {
            let finite = match slot {
                None => true,
                Some(GradSlot::Dense(d)) => d.iter().all(|v| v.is_finite()),
                Some(GradSlot::Rows(r)) => r.values().flatten().all(|v| v.is_finite()),
            };
            if !finite {
                return Err(NumericError::NonFinite {
                    node: idx,
                    op: "param gradient",
                });
            }
        }
        Ok(out)
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

fn add_into(target: &mut [f64], g: &[f64]) {
    target.iter_mut().zip(g).for_each(|(t, g)| *t += g);
}

fn matvec_into(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

fn matvec_backward(store: &ParamStore, out: &mut Gradients, p: ParamId, x: &[f64], g: &[f64], gx: &mut [f64]) {
    let w = store.value(p);
    let cols = w.cols();
    let gw = out.dense_mut(p, store);
    for (r, &gr) in g.iter().enumerate() {
        if gr == 0.0 {
            continue;
        }
        let wrow = &w.data()[r * cols..(r + 1) * cols];
        let grow = &mut gw[r * cols..(r + 1) * cols];
        for c in 0..cols {
            grow[c] += gr * x[c];
            gx[c] += gr * wrow[c];
        }
    }
}
