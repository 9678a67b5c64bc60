//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation applied to its variables in
//! evaluation order. Because nodes are appended only after their inputs, the
//! node list is already a topological order and the backward pass is a single
//! reverse sweep.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::tensor::split_axis;
use super::{GradientMap, Tensor};
use crate::error::{Error, Result};

static NEXT_GRAPH_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    id: usize,
    graph: u64,
}

/// Pointwise nonlinearity selector used by the attention blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Linear {
        x: usize,
        w: usize,
        b: Option<usize>,
    },
    Tanh(usize),
    Relu(usize),
    Softmax {
        x: usize,
        axis: usize,
    },
    SumAxis {
        x: usize,
        axis: usize,
        scale: f64,
    },
    MaxAxis {
        x: usize,
        axis: usize,
        argmax: Vec<usize>,
    },
    SumAll(usize),
    Gather {
        x: usize,
        index: Arc<[usize]>,
    },
    Norm(usize),
    Concat {
        inputs: Vec<usize>,
        axis: usize,
    },
    Reshape(usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// A single-use computation tape.
///
/// Parameters are registered by name with [`Graph::param`]; calling
/// [`Graph::backward`] consumes the tape and returns one gradient per
/// registered parameter.
#[derive(Debug)]
pub struct Graph {
    id: u64,
    nodes: Vec<Node>,
    params: BTreeMap<String, usize>,
    recording: bool,
    kink_margin: f64,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self {
            id: NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            params: BTreeMap::new(),
            recording: true,
            kink_margin: f64::INFINITY,
        }
    }

    /// A graph that evaluates values only. Backward is unavailable.
    pub fn inference() -> Self {
        Self {
            recording: false,
            ..Self::new()
        }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    /// Smallest distance from a non-differentiable point seen so far: the
    /// minimum of `|x|` over relu inputs and of the top-two gap over max
    /// reductions. Finite-difference checks are only meaningful when this is
    /// well above the step size.
    pub fn kink_margin(&self) -> f64 {
        self.kink_margin
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Registers (or reuses) a named trainable leaf.
    pub fn param(&mut self, name: &str, value: &Tensor) -> Var {
        if let Some(&id) = self.params.get(name) {
            return Var { id, graph: self.id };
        }
        let var = self.push(value.clone(), Op::Leaf, self.recording);
        self.params.insert(name.to_string(), var.id);
        var
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.id].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.id].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        let (op, needs_grad) = if self.recording && needs_grad {
            (op, true)
        } else {
            (Op::Leaf, false)
        };
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var {
            id: self.nodes.len() - 1,
            graph: self.id,
        }
    }

    fn check(&self, var: Var) -> Result<usize> {
        if var.graph != self.id || var.id >= self.nodes.len() {
            return Err(Error::ForeignVariable);
        }
        Ok(var.id)
    }

    fn grad_of(&self, id: usize) -> bool {
        self.nodes[id].needs_grad
    }

    fn same_shape(&self, op: &'static str, a: usize, b: usize) -> Result<()> {
        let (sa, sb) = (self.nodes[a].value.shape(), self.nodes[b].value.shape());
        if sa != sb {
            return Err(Error::ShapeMismatch {
                op,
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        Ok(())
    }

    fn zip_with(&mut self, op_name: &'static str, a: Var, b: Var, f: fn(f64, f64) -> f64) -> Result<(Tensor, usize, usize)> {
        let (a, b) = (self.check(a)?, self.check(b)?);
        self.same_shape(op_name, a, b)?;
        let va = &self.nodes[a].value;
        let vb = &self.nodes[b].value;
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        Ok((Tensor::new(va.shape().to_vec(), data)?, a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, a, b) = self.zip_with("add", a, b, |x, y| x + y)?;
        let g = self.grad_of(a) || self.grad_of(b);
        Ok(self.push(t, Op::Add(a, b), g))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, a, b) = self.zip_with("sub", a, b, |x, y| x - y)?;
        let g = self.grad_of(a) || self.grad_of(b);
        Ok(self.push(t, Op::Sub(a, b), g))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, a, b) = self.zip_with("mul", a, b, |x, y| x * y)?;
        let g = self.grad_of(a) || self.grad_of(b);
        Ok(self.push(t, Op::Mul(a, b), g))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let a = self.check(a)?;
        let t = self.nodes[a].value.map(|v| v * factor);
        let g = self.grad_of(a);
        Ok(self.push(t, Op::Scale(a, factor), g))
    }

    /// Affine map over the last axis: `x: [.., in]`, `w: [in, out]`,
    /// `b: [out]` gives `[.., out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xi, wi) = (self.check(x)?, self.check(w)?);
        let bi = b.map(|b| self.check(b)).transpose()?;
        let xs = self.nodes[xi].value.shape().to_vec();
        let ws = self.nodes[wi].value.shape().to_vec();
        if ws.len() != 2 || xs.last() != Some(&ws[0]) {
            return Err(Error::ShapeMismatch {
                op: "linear",
                lhs: xs,
                rhs: ws,
            });
        }
        let (fan_in, fan_out) = (ws[0], ws[1]);
        if let Some(bi) = bi {
            let bs = self.nodes[bi].value.shape();
            if bs != [fan_out] {
                return Err(Error::ShapeMismatch {
                    op: "linear bias",
                    lhs: ws,
                    rhs: bs.to_vec(),
                });
            }
        }
        let rows = self.nodes[xi].value.numel() / fan_in.max(1);
        let mut out = vec![0.0; rows * fan_out];
        if let Some(bi) = bi {
            let bias = self.nodes[bi].value.data();
            for row in out.chunks_exact_mut(fan_out) {
                row.copy_from_slice(bias);
            }
        }
        gemm(
            rows,
            fan_in,
            fan_out,
            self.nodes[xi].value.data(),
            (fan_in, 1),
            self.nodes[wi].value.data(),
            (fan_out, 1),
            &mut out,
        );
        let mut shape = xs;
        *shape.last_mut().unwrap() = fan_out;
        let g = self.grad_of(xi) || self.grad_of(wi) || bi.is_some_and(|b| self.grad_of(b));
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::Linear {
                x: xi,
                w: wi,
                b: bi,
            },
            g,
        ))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let a = self.check(a)?;
        let t = self.nodes[a].value.map(f64::tanh);
        let g = self.grad_of(a);
        Ok(self.push(t, Op::Tanh(a), g))
    }

    /// Rectifier with subgradient 0 at the origin.
    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let a = self.check(a)?;
        let g = self.grad_of(a);
        if g {
            let m = self.nodes[a]
                .value
                .data()
                .iter()
                .fold(f64::INFINITY, |m, v| m.min(v.abs()));
            self.kink_margin = self.kink_margin.min(m);
        }
        let t = self.nodes[a].value.map(|v| if v > 0.0 { v } else { 0.0 });
        Ok(self.push(t, Op::Relu(a), g))
    }

    pub fn activation(&mut self, a: Var, kind: Activation) -> Result<Var> {
        match kind {
            Activation::Tanh => self.tanh(a),
            Activation::Relu => self.relu(a),
        }
    }

    fn check_axis(&self, op: &'static str, id: usize, axis: usize) -> Result<()> {
        let shape = self.nodes[id].value.shape();
        if axis >= shape.len() {
            return Err(Error::ShapeMismatch {
                op,
                lhs: shape.to_vec(),
                rhs: vec![axis],
            });
        }
        Ok(())
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let xi = self.check(x)?;
        self.check_axis("softmax", xi, axis)?;
        let value = &self.nodes[xi].value;
        let (outer, len, inner) = split_axis(value.shape(), axis);
        let src = value.data();
        let mut out = vec![0.0; src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |l: usize| (o * len + l) * inner + i;
                let max = (0..len).map(|l| src[at(l)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for l in 0..len {
                    let e = (src[at(l)] - max).exp();
                    out[at(l)] = e;
                    total += e;
                }
                for l in 0..len {
                    out[at(l)] /= total;
                }
            }
        }
        let t = Tensor::new(value.shape().to_vec(), out)?;
        let g = self.grad_of(xi);
        Ok(self.push(t, Op::Softmax { x: xi, axis }, g))
    }

    fn reduce_axis(&mut self, x: Var, axis: usize, mean: bool) -> Result<Var> {
        let xi = self.check(x)?;
        self.check_axis("sum", xi, axis)?;
        let value = &self.nodes[xi].value;
        let (outer, len, inner) = split_axis(value.shape(), axis);
        let scale = if mean { 1.0 / len as f64 } else { 1.0 };
        let src = value.data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for l in 0..len {
                let row = &src[(o * len + l) * inner..][..inner];
                for (acc, v) in out[o * inner..][..inner].iter_mut().zip(row) {
                    *acc += v;
                }
            }
        }
        if mean {
            out.iter_mut().for_each(|v| *v *= scale);
        }
        let mut shape = value.shape().to_vec();
        shape.remove(axis);
        let g = self.grad_of(xi);
        Ok(self.push(Tensor::new(shape, out)?, Op::SumAxis { x: xi, axis, scale }, g))
    }

    /// Sum over `axis`, removing it.
    pub fn sum_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        self.reduce_axis(x, axis, false)
    }

    /// Mean over `axis`, removing it.
    pub fn mean_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        self.reduce_axis(x, axis, true)
    }

    /// Maximum over `axis`, removing it. Ties resolve to the first index.
    pub fn max_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let xi = self.check(x)?;
        self.check_axis("max", xi, axis)?;
        let value = &self.nodes[xi].value;
        let (outer, len, inner) = split_axis(value.shape(), axis);
        if len == 0 {
            return Err(Error::invalid("max over an empty axis"));
        }
        let src = value.data();
        let mut out = vec![0.0; outer * inner];
        let mut argmax = vec![0usize; outer * inner];
        let mut gap = f64::INFINITY;
        for o in 0..outer {
            for i in 0..inner {
                let (mut best, mut second, mut arg) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0);
                for l in 0..len {
                    let v = src[(o * len + l) * inner + i];
                    if v > best {
                        second = best;
                        best = v;
                        arg = l;
                    } else if v > second {
                        second = v;
                    }
                }
                out[o * inner + i] = best;
                argmax[o * inner + i] = arg;
                if len > 1 {
                    gap = gap.min(best - second);
                }
            }
        }
        let mut shape = value.shape().to_vec();
        shape.remove(axis);
        let g = self.grad_of(xi);
        if g {
            self.kink_margin = self.kink_margin.min(gap);
        }
        Ok(self.push(Tensor::new(shape, out)?, Op::MaxAxis { x: xi, axis, argmax }, g))
    }

    /// Sum of all entries as a scalar.
    pub fn sum_all(&mut self, x: Var) -> Result<Var> {
        let xi = self.check(x)?;
        let total = self.nodes[xi].value.data().iter().sum();
        let g = self.grad_of(xi);
        Ok(self.push(Tensor::scalar(total), Op::SumAll(xi), g))
    }

    /// Selects rows (entries of the first axis) by index; repeats allowed.
    pub fn gather_rows(&mut self, x: Var, index: impl Into<Arc<[usize]>>) -> Result<Var> {
        let xi = self.check(x)?;
        let index: Arc<[usize]> = index.into();
        let value = &self.nodes[xi].value;
        let shape = value.shape();
        if shape.is_empty() {
            return Err(Error::ShapeMismatch {
                op: "gather",
                lhs: Vec::new(),
                rhs: vec![index.len()],
            });
        }
        let rows = shape[0];
        let width: usize = shape[1..].iter().product();
        if let Some(&bad) = index.iter().find(|&&i| i >= rows) {
            return Err(Error::IndexOutOfRange {
                op: "gather",
                index: bad,
                len: rows,
            });
        }
        let src = value.data();
        let mut out = Vec::with_capacity(index.len() * width);
        for &r in index.iter() {
            out.extend_from_slice(&src[r * width..(r + 1) * width]);
        }
        let mut out_shape = shape.to_vec();
        out_shape[0] = index.len();
        let g = self.grad_of(xi);
        Ok(self.push(Tensor::new(out_shape, out)?, Op::Gather { x: xi, index }, g))
    }

    /// Euclidean norm over the last axis, kept as a length-1 axis.
    pub fn norm_last(&mut self, x: Var) -> Result<Var> {
        let xi = self.check(x)?;
        let value = &self.nodes[xi].value;
        let shape = value.shape();
        let d = *shape.last().ok_or(Error::ShapeMismatch {
            op: "norm",
            lhs: Vec::new(),
            rhs: Vec::new(),
        })?;
        let out: Vec<f64> = value
            .data()
            .chunks_exact(d.max(1))
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let mut out_shape = shape.to_vec();
        *out_shape.last_mut().unwrap() = 1;
        let g = self.grad_of(xi);
        Ok(self.push(Tensor::new(out_shape, out)?, Op::Norm(xi), g))
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let ids = inputs
            .iter()
            .map(|&v| self.check(v))
            .collect::<Result<Vec<_>>>()?;
        let first = *ids.first().ok_or_else(|| Error::invalid("concat of zero tensors"))?;
        self.check_axis("concat", first, axis)?;
        let base = self.nodes[first].value.shape().to_vec();
        let mut total = 0;
        for &id in &ids {
            let s = self.nodes[id].value.shape();
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(d, (a, b))| d == axis || a == b);
            if !compatible {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    lhs: base,
                    rhs: s.to_vec(),
                });
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_axis(&base, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &id in &ids {
                let v = &self.nodes[id].value;
                let chunk = v.shape()[axis] * inner;
                out.extend_from_slice(&v.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let g = ids.iter().any(|&id| self.grad_of(id));
        Ok(self.push(Tensor::new(shape, out)?, Op::Concat { inputs: ids, axis }, g))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let xi = self.check(x)?;
        let t = self.nodes[xi].value.clone().reshape(shape)?;
        let g = self.grad_of(xi);
        Ok(self.push(t, Op::Reshape(xi), g))
    }

    /// Runs the reverse sweep from `loss` and consumes the tape.
    pub fn backward(mut self, loss: Var) -> Result<GradientMap> {
        let li = self.check(loss)?;
        let shape = self.nodes[li].value.shape();
        if self.nodes[li].value.numel() != 1 {
            return Err(Error::NonScalarLoss(shape.to_vec()));
        }
        if !self.nodes[li].needs_grad {
            return Err(Error::Disconnected);
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[li] = Some(vec![1.0]);

        for id in (0..=li).rev() {
            if !self.nodes[id].needs_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            if matches!(self.nodes[id].op, Op::Leaf) {
                grads[id] = Some(g);
                continue;
            }
            self.propagate(id, &g, &mut grads);
        }

        let mut out = GradientMap::new();
        for (name, &id) in &self.params {
            let node = &self.nodes[id];
            let data = grads[id]
                .take()
                .unwrap_or_else(|| vec![0.0; node.value.numel()]);
            out.insert(name.clone(), Tensor::new(node.value.shape().to_vec(), data)?);
        }
        self.nodes.clear();
        Ok(out)
    }

    fn propagate(&self, id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        macro_rules! with_grad {
            ($i:expr, |$acc:ident| $body:block) => {
                if let Some($acc) = grad_slot(nodes, grads, $i) {
                    $body
                }
            };
        }
        let value = |i: usize| nodes[i].value.data();

        match &nodes[id].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                with_grad!(*a, |acc| { axpy(acc, g, 1.0) });
                with_grad!(*b, |acc| { axpy(acc, g, 1.0) });
            }
            Op::Sub(a, b) => {
                with_grad!(*a, |acc| { axpy(acc, g, 1.0) });
                with_grad!(*b, |acc| { axpy(acc, g, -1.0) });
            }
            Op::Mul(a, b) => {
                let (va, vb) = (value(*a), value(*b));
                with_grad!(*a, |acc| {
                    for ((o, gi), y) in acc.iter_mut().zip(g).zip(vb) {
                        *o += gi * y;
                    }
                });
                with_grad!(*b, |acc| {
                    for ((o, gi), x) in acc.iter_mut().zip(g).zip(va) {
                        *o += gi * x;
                    }
                });
            }
            Op::Scale(a, c) => with_grad!(*a, |acc| { axpy(acc, g, *c) }),
            Op::Linear { x, w, b } => {
                let ws = nodes[*w].value.shape();
                let (fan_in, fan_out) = (ws[0], ws[1]);
                let rows = g.len() / fan_out.max(1);
                with_grad!(*x, |acc| {
                    // dx = g * w^T
                    gemm(rows, fan_out, fan_in, g, (fan_out, 1), value(*w), (1, fan_out), acc);
                });
                with_grad!(*w, |acc| {
                    // dw = x^T * g
                    gemm(fan_in, rows, fan_out, value(*x), (1, fan_in), g, (fan_out, 1), acc);
                });
                if let Some(b) = b {
                    with_grad!(*b, |acc| {
                        for row in g.chunks_exact(fan_out) {
                            for (o, gi) in acc.iter_mut().zip(row) {
                                *o += gi;
                            }
                        }
                    });
                }
            }
            Op::Tanh(a) => {
                let y = nodes[id].value.data();
                with_grad!(*a, |acc| {
                    for ((o, gi), yi) in acc.iter_mut().zip(g).zip(y) {
                        *o += gi * (1.0 - yi * yi);
                    }
                });
            }
            Op::Relu(a) => {
                let x = value(*a);
                with_grad!(*a, |acc| {
                    for ((o, gi), xi) in acc.iter_mut().zip(g).zip(x) {
                        if *xi > 0.0 {
                            *o += gi;
                        }
                    }
                });
            }
            Op::Softmax { x, axis } => {
                let y = nodes[id].value.data();
                let (outer, len, inner) = split_axis(nodes[id].value.shape(), *axis);
                with_grad!(*x, |acc| {
                    for o in 0..outer {
                        for i in 0..inner {
                            let at = |l: usize| (o * len + l) * inner + i;
                            let dot: f64 = (0..len).map(|l| y[at(l)] * g[at(l)]).sum();
                            for l in 0..len {
                                acc[at(l)] += y[at(l)] * (g[at(l)] - dot);
                            }
                        }
                    }
                });
            }
            Op::SumAxis { x, axis, scale } => {
                let (outer, len, inner) = split_axis(nodes[*x].value.shape(), *axis);
                with_grad!(*x, |acc| {
                    for o in 0..outer {
                        let src = &g[o * inner..][..inner];
                        for l in 0..len {
                            for (a, gi) in acc[(o * len + l) * inner..][..inner].iter_mut().zip(src) {
                                *a += gi * scale;
                            }
                        }
                    }
                });
            }
            Op::MaxAxis { x, axis, argmax } => {
                let (_, len, inner) = split_axis(nodes[*x].value.shape(), *axis);
                with_grad!(*x, |acc| {
                    for (j, (&l, gi)) in argmax.iter().zip(g).enumerate() {
                        let (o, i) = (j / inner, j % inner);
                        acc[(o * len + l) * inner + i] += gi;
                    }
                });
            }
            Op::SumAll(a) => with_grad!(*a, |acc| {
                acc.iter_mut().for_each(|o| *o += g[0]);
            }),
            Op::Gather { x, index } => {
                let width = g.len() / index.len().max(1);
                with_grad!(*x, |acc| {
                    for (r, &src) in index.iter().enumerate() {
                        for (o, gi) in acc[src * width..][..width].iter_mut().zip(&g[r * width..][..width]) {
                            *o += gi;
                        }
                    }
                });
            }
            Op::Norm(a) => {
                let x = value(*a);
                let norms = nodes[id].value.data();
                let d = x.len() / norms.len().max(1);
                with_grad!(*a, |acc| {
                    for (r, (&n, gi)) in norms.iter().zip(g).enumerate() {
                        if n > 0.0 {
                            for c in 0..d {
                                acc[r * d + c] += gi * x[r * d + c] / n;
                            }
                        }
                    }
                });
            }
            Op::Concat { inputs, axis } => {
                let (outer, total, inner) = split_axis(nodes[id].value.shape(), *axis);
                let mut offset = 0;
                for &inp in inputs {
                    let len = nodes[inp].value.shape()[*axis];
                    with_grad!(inp, |acc| {
                        for o in 0..outer {
                            let src = &g[(o * total + offset) * inner..][..len * inner];
                            axpy(&mut acc[o * len * inner..][..len * inner], src, 1.0);
                        }
                    });
                    offset += len;
                }
            }
            Op::Reshape(a) => with_grad!(*a, |acc| { axpy(acc, g, 1.0) }),
        }
    }
}

fn grad_slot<'a>(nodes: &[Node], grads: &'a mut [Option<Vec<f64>>], i: usize) -> Option<&'a mut Vec<f64>> {
    if !nodes[i].needs_grad {
        return None;
    }
    Some(grads[i].get_or_insert_with(|| vec![0.0; nodes[i].value.numel()]))
}

fn axpy(acc: &mut [f64], g: &[f64], alpha: f64) {
    for (o, gi) in acc.iter_mut().zip(g) {
        *o += alpha * gi;
    }
}

/// `c += a * b` with `a: m x k`, `b: k x n`, `c: m x n` (row-major `c`);
/// `a` and `b` strides given as (row stride, column stride).
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    c: &mut [f64],
) {
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    debug_assert!(c.len() >= m * n);
    debug_assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
    debug_assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
    // SAFETY: the asserted bounds cover every element dgemm touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
