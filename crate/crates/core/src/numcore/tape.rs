//! Reverse-mode differentiation over a flat operation tape.
//!
//! Every operation appends a node holding its forward value and the handles
//! of its inputs. [`GradTape::backward`] walks the nodes in reverse and
//! accumulates adjoints in index order, so gradients are bit-reproducible.

use super::prob::log_softmax_into;
use super::tensor::{matmul, matmul_nt, matmul_tn, Tensor};
use crate::{Error, Result};

/// Handle to a node on a [`GradTape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `(n × m) + (m)` broadcast over rows.
    AddRow(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Relu(Var),
    LogSoftmax(Var),
    Square(Var),
    Sum(Var),
    Scale(Var, f64),
    AddScalar(Var, f64),
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct GradTape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`GradTape::backward`], one slot per tape node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `var`; zeros if `var` does not
    /// influence the loss.
    pub fn wrt(&self, var: Var) -> Tensor {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(self.shapes[var.0].clone()),
        }
    }

    pub fn take(&mut self, var: Var) -> Tensor {
        self.grads[var.0]
            .take()
            .unwrap_or_else(|| Tensor::zeros(self.shapes[var.0].clone()))
    }
}

impl GradTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::MatMul(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.record(Op::AddRow(a, row))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Mul(a, b))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Relu(a))
    }

    /// Log-softmax over the last dimension, row by row.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        self.record(Op::LogSoftmax(a))
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Square(a))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Sum(a))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        self.record(Op::Scale(a, factor))
    }

    pub fn add_scalar(&mut self, a: Var, offset: f64) -> Result<Var> {
        self.record(Op::AddScalar(a, offset))
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn record(&mut self, op: Op) -> Result<Var> {
        let value = self.eval(&op, |v| &self.nodes[v.0].value)?;
        let requires_grad = inputs(&op).iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push(value, op, requires_grad))
    }

    fn eval<'a>(&'a self, op: &Op, value: impl Fn(Var) -> &'a Tensor) -> Result<Tensor> {
        Ok(match *op {
            Op::Leaf => unreachable!("leaves are not evaluated"),
            Op::MatMul(a, b) => matmul(value(a), value(b))?,
            Op::AddRow(a, r) => {
                let (a, r) = (value(a), value(r));
                if a.shape().len() != 2 || r.len() != a.cols() {
                    return Err(Error::invalid(format!(
                        "cannot broadcast {:?} over rows of {:?}",
                        r.shape(),
                        a.shape()
                    )));
                }
                let mut out = a.clone();
                for i in 0..out.rows() {
                    for (o, &b) in out.row_mut(i).iter_mut().zip(r.data()) {
                        *o += b;
                    }
                }
                out
            }
            Op::Add(a, b) => value(a).zip_map(value(b), |x, y| x + y)?,
            Op::Mul(a, b) => value(a).zip_map(value(b), |x, y| x * y)?,
            Op::Relu(a) => value(a).map(|x| x.max(0.0)),
            Op::LogSoftmax(a) => {
                let a = value(a);
                let mut out = a.clone();
                for i in 0..a.rows() {
                    log_softmax_into(a.row(i), out.row_mut(i));
                }
                out
            }
            Op::Square(a) => value(a).map(|x| x * x),
            Op::Sum(a) => Tensor::scalar(value(a).data().iter().sum()),
            Op::Scale(a, f) => value(a).map(|x| x * f),
            Op::AddScalar(a, c) => value(a).map(|x| x + c),
        })
    }

    /// Recomputes every non-leaf node from the recorded leaves.
    pub fn replay(&self) -> Result<Vec<Tensor>> {
        let mut values: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node.op {
                Op::Leaf => node.value.clone(),
                ref op => {
                    let vals = &values;
                    self.eval(op, |v| &vals[v.0])?
                }
            };
            values.push(v);
        }
        Ok(values)
    }

    /// Reverse accumulation from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let n = self.nodes.len();
        let shapes: Vec<Vec<usize>> = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        if !self.nodes[loss.0].value.is_scalar() {
            return Err(Error::invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                shapes[loss.0]
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; n];
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(Tensor::new(shapes[loss.0].clone(), vec![1.0])?);
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let send = |v: Var, contrib: Tensor, grads: &mut Vec<Option<Tensor>>| {
                if !self.nodes[v.0].requires_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.accumulate(&contrib),
                    slot => *slot = Some(contrib),
                }
            };
            match node.op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(a), self.value(b));
                    if self.requires_grad(a) {
                        send(a, matmul_nt(&g, bv), &mut grads);
                    }
                    if self.requires_grad(b) {
                        send(b, matmul_tn(av, &g), &mut grads);
                    }
                }
                Op::AddRow(a, r) => {
                    if self.requires_grad(r) {
                        let mut gr = vec![0.0; g.cols()];
                        for i in 0..g.rows() {
                            for (acc, &x) in gr.iter_mut().zip(g.row(i)) {
                                *acc += x;
                            }
                        }
                        send(r, Tensor::new(shapes[r.0].clone(), gr)?, &mut grads);
                    }
                    send(a, g, &mut grads);
                }
                Op::Add(a, b) => {
                    send(b, g.clone(), &mut grads);
                    send(a, g, &mut grads);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(a), self.value(b));
                    if self.requires_grad(a) {
                        send(a, g.zip_map(bv, |x, y| x * y)?, &mut grads);
                    }
                    if self.requires_grad(b) {
                        send(b, g.zip_map(av, |x, y| x * y)?, &mut grads);
                    }
                }
                Op::Relu(a) => {
                    let gi = g.zip_map(self.value(a), |x, v| if v > 0.0 { x } else { 0.0 })?;
                    send(a, gi, &mut grads);
                }
                Op::LogSoftmax(a) => {
                    // d/dx_j of Σ_i g_i (x_i - lse) = g_j - softmax_j Σ_i g_i
                    let out = &node.value;
                    let mut gi = g.clone();
                    for r in 0..g.rows() {
                        let gsum: f64 = g.row(r).iter().sum();
                        let orow = out.row(r);
                        for (x, &o) in gi.row_mut(r).iter_mut().zip(orow) {
                            *x -= o.exp() * gsum;
                        }
                    }
                    send(a, gi, &mut grads);
                }
                Op::Square(a) => {
                    let gi = g.zip_map(self.value(a), |x, v| 2.0 * v * x)?;
                    send(a, gi, &mut grads);
                }
                Op::Sum(a) => {
                    let s = g.data()[0];
                    send(a, Tensor::new(shapes[a.0].clone(), vec![s; self.value(a).len()])?, &mut grads);
                }
                Op::Scale(a, f) => send(a, g.map(|x| x * f), &mut grads),
                Op::AddScalar(a, _) => send(a, g, &mut grads),
            }
        }
        Ok(Gradients { grads, shapes })
    }
}

fn inputs(op: &Op) -> Vec<Var> {
    match *op {
        Op::Leaf => vec![],
        Op::MatMul(a, b) | Op::AddRow(a, b) | Op::Add(a, b) | Op::Mul(a, b) => vec![a, b],
        Op::Relu(a)
        | Op::LogSoftmax(a)
        | Op::Square(a)
        | Op::Sum(a)
        | Op::Scale(a, _)
        | Op::AddScalar(a, _) => vec![a],
    }
}
