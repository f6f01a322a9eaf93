//! Reverse-mode automatic differentiation over dense arrays.
//!
//! A [`Graph`] records every operation applied to its variables. Calling
//! [`Graph::backward`] on a scalar node walks the record in reverse and
//! accumulates gradients for every node that depends on a trainable leaf.
//!
//! ```
//! use dance_core::numerics::{Array, Graph};
//!
//! let mut g = Graph::<f64>::new();
//! let w = g.input(Array::from_rows(&[vec![1.0, 2.0]]).unwrap());
//! let x = g.constant(Array::from_rows(&[vec![3.0], vec![4.0]]).unwrap());
//! let y = g.matmul(w, x).unwrap();
//! let loss = g.sum(y);
//! let grads = g.backward(loss).unwrap();
//! assert_eq!(grads.get(w).unwrap().data(), &[3.0, 4.0]);
//! ```

use std::collections::HashMap;
use std::sync::Arc;

use super::kernels;
use super::{Array, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::Scalar;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<S> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, S),
    Relu(Var),
    Softmax(Var),
    CausalSoftmax(Var),
    LogSoftmax(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<S>,
        inv_std: Vec<S>,
    },
    Conv1dCausal {
        x: Var,
        w: Var,
        b: Var,
        kernel: usize,
    },
    Embedding {
        table: Var,
        indices: Vec<usize>,
    },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    Transpose(Var),
    Reshape(Var),
    Nll {
        logp: Var,
        targets: Vec<usize>,
    },
    Sum(Var),
    Mean(Var),
    MeanRows(Var),
}

#[derive(Debug)]
struct Node<S> {
    value: Arc<Array<S>>,
    op: Op<S>,
    requires_grad: bool,
}

/// Computation record for one forward pass.
#[derive(Debug)]
pub struct Graph<S> {
    nodes: Vec<Node<S>>,
    params: HashMap<ParamId, Var>,
    backward_done: bool,
}

/// Gradients produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients<S> {
    grads: Vec<Option<Array<S>>>,
    params: Vec<(ParamId, Var)>,
}

impl<S: Scalar> Gradients<S> {
    /// Gradient of `v`. `None` for nodes that do not depend on any trainable leaf.
    pub fn get(&self, v: Var) -> Option<&Array<S>> {
        self.grads[v.0].as_ref()
    }

    /// Gradients of every parameter bound into the graph, ordered by parameter id.
    /// Parameters that did not influence the loss get zeros.
    pub fn param_grads(&self, store: &ParamStore<S>) -> Vec<Array<S>> {
        let mut out: Vec<Array<S>> = (0..store.len())
            .map(|id| Array::zeros(store.get(id).shape()))
            .collect();
        for &(id, var) in &self.params {
            if let Some(g) = &self.grads[var.0] {
                out[id] = g.clone();
            }
        }
        out
    }
}

fn check_2d<S: Scalar>(op: &'static str, a: &Array<S>) -> Result<(usize, usize)> {
    if a.ndim() != 2 {
        return Err(Error::shape(op, a.shape(), &[0, 0]));
    }
    Ok((a.shape()[0], a.shape()[1]))
}

impl<S: Scalar> Default for Graph<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Graph<S> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: HashMap::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array<S> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Array<S>, op: Op<S>, requires_grad: bool) -> Var {
        self.push_arc(Arc::new(value), op, requires_grad)
    }

    fn push_arc(&mut self, value: Arc<Array<S>>, op: Op<S>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf.
    pub fn input(&mut self, value: Array<S>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Non-trainable leaf.
    pub fn constant(&mut self, value: Array<S>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Binds parameter `id` of `store` as a trainable leaf. Repeated calls return
    /// the same node, so gradients of shared parameters accumulate in one place.
    pub fn param(&mut self, store: &ParamStore<S>, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push_arc(store.get_arc(id), Op::Leaf, true);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::shape("add", va.shape(), vb.shape()));
        }
        let mut out = va.clone();
        kernels::add_in_place(out.data_mut(), vb.data());
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    /// Adds a bias vector to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(bias));
        if vb.len() != va.cols() || va.ndim() == 0 {
            return Err(Error::shape("add_row", va.shape(), vb.shape()));
        }
        let mut out = va.clone();
        for i in 0..out.rows() {
            kernels::add_in_place(out.row_mut(i), vb.data());
        }
        let rg = self.rg(a) || self.rg(bias);
        Ok(self.push(out, Op::AddRow(a, bias), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::shape("mul", va.shape(), vb.shape()));
        }
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| x * y)
            .collect();
        let out = Array::new(va.shape(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, s: S) -> Var {
        let out = self.value(a).map(|v| v * s);
        let rg = self.rg(a);
        self.push(out, Op::Scale(a, s), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        kernels::relu_in_place(out.data_mut());
        let rg = self.rg(a);
        self.push(out, Op::Relu(a), rg)
    }

    /// Softmax along the last axis.
    pub fn softmax(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let mut out = Array::zeros(va.shape());
        for i in 0..va.rows() {
            kernels::softmax(va.row(i), out.row_mut(i));
        }
        let rg = self.rg(a);
        self.push(out, Op::Softmax(a), rg)
    }

    /// Softmax of a `[T, T]` score matrix where row `t` only sees columns `0..=t`.
    /// Masked entries are exactly zero. Non-finite probabilities abort with the
    /// offending row.
    pub fn causal_softmax(&mut self, a: Var) -> Result<Var> {
        let va = self.value(a);
        let (r, c) = check_2d("causal_softmax", va)?;
        if r != c {
            return Err(Error::shape("causal_softmax", va.shape(), &[r, r]));
        }
        let mut out = Array::zeros(va.shape());
        for i in 0..r {
            let row = out.row_mut(i);
            kernels::softmax(&va.row(i)[..=i], &mut row[..=i]);
            if row[..=i].iter().any(|p| !p.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite attention probabilities at query row {i}: scores {:?}",
                    &va.row(i)[..=i]
                )));
            }
        }
        let rg = self.rg(a);
        Ok(self.push(out, Op::CausalSoftmax(a), rg))
    }

    /// Log-softmax along the last axis.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let mut out = Array::zeros(va.shape());
        for i in 0..va.rows() {
            kernels::log_softmax(va.row(i), out.row_mut(i));
        }
        let rg = self.rg(a);
        self.push(out, Op::LogSoftmax(a), rg)
    }

    /// Layer normalization along the last axis with learned gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: S) -> Result<Var> {
        let (vx, vg, vb) = (self.value(x), self.value(gain), self.value(bias));
        let n = vx.cols();
        if vg.len() != n || vb.len() != n {
            return Err(Error::shape("layer_norm", vx.shape(), vg.shape()));
        }
        let rows = vx.rows();
        let mut out = Array::zeros(vx.shape());
        let mut xhat = vec![S::zero(); vx.len()];
        let mut inv_std = Vec::with_capacity(rows);
        for i in 0..rows {
            let s = kernels::layer_norm(
                vx.row(i),
                vg.data(),
                vb.data(),
                eps,
                &mut xhat[i * n..(i + 1) * n],
                out.row_mut(i),
            );
            inv_std.push(s);
        }
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            rg,
        ))
    }

    /// Causal 1-D convolution along time. `x` is `[T, C_in]`, `w` is
    /// `[kernel * C_in, C_out]` (tap-major), `b` is `[C_out]`; the input is
    /// left-padded with `kernel - 1` zero rows so output row `t` sees inputs
    /// `t - kernel + 1 ..= t`.
    pub fn conv1d_causal(&mut self, x: Var, w: Var, b: Var, kernel: usize) -> Result<Var> {
        let (vx, vw, vb) = (self.value(x), self.value(w), self.value(b));
        let (t_len, c_in) = check_2d("conv1d_causal", vx)?;
        let (wr, c_out) = check_2d("conv1d_causal", vw)?;
        if kernel == 0 || wr != kernel * c_in || vb.len() != c_out {
            return Err(Error::shape("conv1d_causal", vx.shape(), vw.shape()));
        }
        let mut out = Array::zeros(&[t_len, c_out]);
        let mut window: Vec<Option<&[S]>> = vec![None; kernel];
        for t in 0..t_len {
            for (k, slot) in window.iter_mut().enumerate() {
                let src = t as isize - (kernel - 1) as isize + k as isize;
                *slot = (src >= 0).then(|| vx.row(src as usize));
            }
            kernels::conv_row(&window, vw, vb.data(), out.row_mut(t));
        }
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(out, Op::Conv1dCausal { x, w, b, kernel }, rg))
    }

    /// Row lookup into `table` (`[V, E]`). `indices` holds `rows × D` entries in
    /// row-major order; the output is `[rows, D * E]`.
    pub fn embedding(&mut self, table: Var, indices: &[usize], rows: usize) -> Result<Var> {
        let vt = self.value(table);
        let (v, e) = check_2d("embedding", vt)?;
        if rows == 0 || !indices.len().is_multiple_of(rows) {
            return Err(Error::shape("embedding", &[indices.len()], &[rows]));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= v) {
            return Err(Error::invalid(format!(
                "embedding index {bad} out of range [0, {v})"
            )));
        }
        let d = indices.len() / rows;
        let mut out = Array::zeros(&[rows, d * e]);
        for (slot, &idx) in indices.iter().enumerate() {
            out.data_mut()[slot * e..(slot + 1) * e].copy_from_slice(vt.row(idx));
        }
        let rg = self.rg(table);
        Ok(self.push(
            out,
            Op::Embedding {
                table,
                indices: indices.to_vec(),
            },
            rg,
        ))
    }

    /// Concatenation along the last axis of 2-D arrays with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("concat of nothing"))?;
        let rows = self.value(*first).rows();
        let mut cols = 0;
        for &p in parts {
            let (r, c) = check_2d("concat_cols", self.value(p))?;
            if r != rows {
                return Err(Error::shape(
                    "concat_cols",
                    self.value(*first).shape(),
                    self.value(p).shape(),
                ));
            }
            cols += c;
        }
        let mut out = Array::zeros(&[rows, cols]);
        for i in 0..rows {
            let mut off = 0;
            for &p in parts {
                let src = self.nodes[p.0].value.row(i);
                out.row_mut(i)[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// Concatenation along the first axis of 2-D arrays with equal column counts.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("concat of nothing"))?;
        let cols = self.value(*first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let vp = self.value(p);
            let (r, c) = check_2d("concat_rows", vp)?;
            if c != cols {
                return Err(Error::shape(
                    "concat_rows",
                    self.value(*first).shape(),
                    vp.shape(),
                ));
            }
            rows += r;
            data.extend_from_slice(vp.data());
        }
        let out = Array::new(&[rows, cols], data)?;
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(out, Op::ConcatRows(parts.to_vec()), rg))
    }

    /// Columns `start..end` of a 2-D array.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let va = self.value(a);
        let (r, c) = check_2d("slice_cols", va)?;
        if start >= end || end > c {
            return Err(Error::shape("slice_cols", va.shape(), &[start, end]));
        }
        let mut data = Vec::with_capacity(r * (end - start));
        for i in 0..r {
            data.extend_from_slice(&va.row(i)[start..end]);
        }
        let out = Array::new(&[r, end - start], data)?;
        let rg = self.rg(a);
        Ok(self.push(out, Op::SliceCols(a, start), rg))
    }

    /// Rows `start..end` of a 2-D array.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let va = self.value(a);
        let (r, c) = check_2d("slice_rows", va)?;
        if start >= end || end > r {
            return Err(Error::shape("slice_rows", va.shape(), &[start, end]));
        }
        let out = Array::new(&[end - start, c], va.data()[start * c..end * c].to_vec())?;
        let rg = self.rg(a);
        Ok(self.push(out, Op::SliceRows(a, start), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        check_2d("transpose", self.value(a))?;
        let out = self.value(a).transpose();
        let rg = self.rg(a);
        Ok(self.push(out, Op::Transpose(a), rg))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).reshape(shape)?;
        let rg = self.rg(a);
        Ok(self.push(out, Op::Reshape(a), rg))
    }

    /// Mean negative log-likelihood of `targets` under row-wise log-probabilities.
    pub fn nll(&mut self, logp: Var, targets: &[usize]) -> Result<Var> {
        let vl = self.value(logp);
        let (r, c) = check_2d("nll", vl)?;
        if targets.len() != r || r == 0 {
            return Err(Error::shape("nll", vl.shape(), &[targets.len()]));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= c) {
            return Err(Error::invalid(format!(
                "target {bad} out of range [0, {c})"
            )));
        }
        let mut acc = S::zero();
        for (i, &t) in targets.iter().enumerate() {
            acc += -vl.row(i)[t];
        }
        let out = Array::scalar(acc / S::of_usize(r));
        let rg = self.rg(logp);
        Ok(self.push(
            out,
            Op::Nll {
                logp,
                targets: targets.to_vec(),
            },
            rg,
        ))
    }

    /// Mean cross-entropy between row-wise logits and integer targets.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let lp = self.log_softmax(logits);
        self.nll(lp, targets)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Array::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(out, Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let out = Array::scalar(va.sum() / S::of_usize(va.len()));
        let rg = self.rg(a);
        self.push(out, Op::Mean(a), rg)
    }

    /// Mean over the first axis of a 2-D array, giving `[1, C]`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let va = self.value(a);
        let (r, c) = check_2d("mean_rows", va)?;
        let mut out = vec![S::zero(); c];
        for i in 0..r {
            kernels::add_in_place(&mut out, va.row(i));
        }
        let n = S::of_usize(r);
        for v in &mut out {
            *v /= n;
        }
        let out = Array::new(&[1, c], out)?;
        let rg = self.rg(a);
        Ok(self.push(out, Op::MeanRows(a), rg))
    }

    /// Back-propagates from the scalar `loss`. May be called once per graph.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<S>> {
        if self.backward_done {
            return Err(Error::invalid(
                "backward already ran on this graph; build a new graph",
            ));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        self.backward_done = true;
        let mut grads: Vec<Option<Array<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array::full(self.value(loss).shape(), S::one()));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(gout) = grads[idx].take() else {
                continue;
            };
            self.backprop_node(idx, &gout, &mut grads)?;
            grads[idx] = Some(gout);
        }

        let mut params: Vec<(ParamId, Var)> = self.params.iter().map(|(&k, &v)| (k, v)).collect();
        params.sort_unstable();
        Ok(Gradients { grads, params })
    }

    fn accumulate(&self, grads: &mut [Option<Array<S>>], v: Var, g: Array<S>) {
        if !self.rg(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => kernels::add_in_place(acc.data_mut(), g.data()),
            slot @ None => *slot = Some(g),
        }
    }

    fn backprop_node(
        &self,
        idx: usize,
        gout: &Array<S>,
        grads: &mut [Option<Array<S>>],
    ) -> Result<()> {
        let node = &self.nodes[idx];
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (m, k) = (va.shape()[0], va.shape()[1]);
                let n = vb.shape()[1];
                if self.rg(*a) {
                    let mut ga = Array::zeros(va.shape());
                    for i in 0..m {
                        let grow = gout.row(i);
                        let garow = ga.row_mut(i);
                        for kk in 0..k {
                            garow[kk] = kernels::dot(grow, vb.row(kk));
                        }
                    }
                    self.accumulate(grads, *a, ga);
                }
                if self.rg(*b) {
                    let mut gb = Array::zeros(vb.shape());
                    let gbd = gb.data_mut();
                    for i in 0..m {
                        let grow = gout.row(i);
                        for (kk, &av) in va.row(i).iter().enumerate() {
                            if av != S::zero() {
                                kernels::axpy(av, grow, &mut gbd[kk * n..(kk + 1) * n]);
                            }
                        }
                    }
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, gout.clone());
                self.accumulate(grads, *b, gout.clone());
            }
            Op::AddRow(a, b) => {
                self.accumulate(grads, *a, gout.clone());
                if self.rg(*b) {
                    let vb = self.value(*b);
                    let mut gb = vec![S::zero(); vb.len()];
                    for i in 0..gout.rows() {
                        kernels::add_in_place(&mut gb, gout.row(i));
                    }
                    self.accumulate(grads, *b, Array::new(vb.shape(), gb)?);
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.rg(*a) {
                    let d = gout
                        .data()
                        .iter()
                        .zip(vb.data())
                        .map(|(&g, &y)| g * y)
                        .collect();
                    self.accumulate(grads, *a, Array::new(va.shape(), d)?);
                }
                if self.rg(*b) {
                    let d = gout
                        .data()
                        .iter()
                        .zip(va.data())
                        .map(|(&g, &x)| g * x)
                        .collect();
                    self.accumulate(grads, *b, Array::new(vb.shape(), d)?);
                }
            }
            Op::Scale(a, s) => {
                let s = *s;
                self.accumulate(grads, *a, gout.map(|g| g * s));
            }
            Op::Relu(a) => {
                let va = self.value(*a);
                let d = gout
                    .data()
                    .iter()
                    .zip(va.data())
                    .map(|(&g, &x)| if x > S::zero() { g } else { S::zero() })
                    .collect();
                self.accumulate(grads, *a, Array::new(va.shape(), d)?);
            }
            Op::Softmax(a) | Op::CausalSoftmax(a) => {
                let mut ga = Array::zeros(out.shape());
                for i in 0..out.rows() {
                    let (y, gy) = (out.row(i), gout.row(i));
                    let s = kernels::dot(y, gy);
                    for (j, g) in ga.row_mut(i).iter_mut().enumerate() {
                        *g = y[j] * (gy[j] - s);
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::LogSoftmax(a) => {
                let mut ga = Array::zeros(out.shape());
                for i in 0..out.rows() {
                    let (y, gy) = (out.row(i), gout.row(i));
                    let s: S = gy.iter().copied().sum();
                    for (j, g) in ga.row_mut(i).iter_mut().enumerate() {
                        *g = gy[j] - y[j].exp() * s;
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let vg = self.value(*gain);
                let n = vg.len();
                let nf = S::of_usize(n);
                let rows = gout.rows();
                let mut gx = Array::zeros(self.value(*x).shape());
                let mut gg = vec![S::zero(); n];
                let mut gbias = vec![S::zero(); n];
                let mut dxhat = vec![S::zero(); n];
                for i in 0..rows {
                    let gy = gout.row(i);
                    let xh = &xhat[i * n..(i + 1) * n];
                    let mut sum_d = S::zero();
                    let mut sum_dx = S::zero();
                    for j in 0..n {
                        gg[j] += gy[j] * xh[j];
                        gbias[j] += gy[j];
                        dxhat[j] = gy[j] * vg.data()[j];
                        sum_d += dxhat[j];
                        sum_dx += dxhat[j] * xh[j];
                    }
                    let k = inv_std[i] / nf;
                    for (j, g) in gx.row_mut(i).iter_mut().enumerate() {
                        *g = k * (nf * dxhat[j] - sum_d - xh[j] * sum_dx);
                    }
                }
                self.accumulate(grads, *x, gx);
                self.accumulate(grads, *gain, Array::new(vg.shape(), gg)?);
                self.accumulate(grads, *bias, Array::new(self.value(*bias).shape(), gbias)?);
            }
            Op::Conv1dCausal { x, w, b, kernel } => {
                let (vx, vw) = (self.value(*x), self.value(*w));
                let (t_len, c_in) = (vx.shape()[0], vx.shape()[1]);
                let c_out = vw.shape()[1];
                let mut gx = Array::zeros(vx.shape());
                let mut gw = Array::zeros(vw.shape());
                let mut gb = vec![S::zero(); c_out];
                for t in 0..t_len {
                    let gy = gout.row(t);
                    kernels::add_in_place(&mut gb, gy);
                    for k in 0..*kernel {
                        let src = t as isize - (*kernel - 1) as isize + k as isize;
                        if src < 0 {
                            continue;
                        }
                        let src = src as usize;
                        for c in 0..c_in {
                            let r = k * c_in + c;
                            let xv = vx.row(src)[c];
                            gx.row_mut(src)[c] += kernels::dot(vw.row(r), gy);
                            kernels::axpy(xv, gy, gw.row_mut(r));
                        }
                    }
                }
                self.accumulate(grads, *x, gx);
                self.accumulate(grads, *w, gw);
                self.accumulate(grads, *b, Array::new(self.value(*b).shape(), gb)?);
            }
            Op::Embedding { table, indices } => {
                let vt = self.value(*table);
                let e = vt.cols();
                let mut gt = Array::zeros(vt.shape());
                for (slot, &idx) in indices.iter().enumerate() {
                    kernels::add_in_place(gt.row_mut(idx), &gout.data()[slot * e..(slot + 1) * e]);
                }
                self.accumulate(grads, *table, gt);
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let vp = self.value(p);
                    let c = vp.cols();
                    let mut gp = Array::zeros(vp.shape());
                    for i in 0..vp.rows() {
                        gp.row_mut(i).copy_from_slice(&gout.row(i)[off..off + c]);
                    }
                    off += c;
                    self.accumulate(grads, p, gp);
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let vp = self.value(p);
                    let n = vp.len();
                    let gp = Array::new(vp.shape(), gout.data()[off..off + n].to_vec())?;
                    off += n;
                    self.accumulate(grads, p, gp);
                }
            }
            Op::SliceCols(a, start) => {
                let va = self.value(*a);
                let w = out.cols();
                let mut ga = Array::zeros(va.shape());
                for i in 0..va.rows() {
                    ga.row_mut(i)[*start..*start + w].copy_from_slice(gout.row(i));
                }
                self.accumulate(grads, *a, ga);
            }
            Op::SliceRows(a, start) => {
                let va = self.value(*a);
                let c = va.cols();
                let mut ga = Array::zeros(va.shape());
                ga.data_mut()[start * c..start * c + gout.len()].copy_from_slice(gout.data());
                self.accumulate(grads, *a, ga);
            }
            Op::Transpose(a) => {
                self.accumulate(grads, *a, gout.transpose());
            }
            Op::Reshape(a) => {
                let ga = gout.reshape(self.value(*a).shape())?;
                self.accumulate(grads, *a, ga);
            }
            Op::Nll { logp, targets } => {
                let vl = self.value(*logp);
                let mut gl = Array::zeros(vl.shape());
                let g = -gout.item() / S::of_usize(targets.len());
                for (i, &t) in targets.iter().enumerate() {
                    gl.row_mut(i)[t] = g;
                }
                self.accumulate(grads, *logp, gl);
            }
            Op::Sum(a) => {
                let g = gout.item();
                self.accumulate(grads, *a, Array::full(self.value(*a).shape(), g));
            }
            Op::Mean(a) => {
                let va = self.value(*a);
                let g = gout.item() / S::of_usize(va.len());
                self.accumulate(grads, *a, Array::full(va.shape(), g));
            }
            Op::MeanRows(a) => {
                let va = self.value(*a);
                let r = va.rows();
                let inv = S::one() / S::of_usize(r);
                let mut ga = Array::zeros(va.shape());
                for i in 0..r {
                    for (g, &v) in ga.row_mut(i).iter_mut().zip(gout.data()) {
                        *g = v * inv;
                    }
                }
                self.accumulate(grads, *a, ga);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arr(rows: &[Vec<f64>]) -> Array<f64> {
        Array::from_rows(rows).unwrap()
    }

    #[test]
    fn softmax_length_one_axis() {
        let mut g = Graph::new();
        let x = g.constant(arr(&[vec![-4.0], vec![12.0]]));
        let y = g.softmax(x);
        assert_eq!(g.value(y).data(), &[1.0, 1.0]);
    }

    #[test]
    fn cross_entropy_uniform_300() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(Array::zeros(&[3, 300]));
        let l = g.cross_entropy(x, &[0, 17, 299]).unwrap();
        assert!((g.value(l).item() - 300f64.ln()).abs() < 1e-12);
        assert!((300f64.ln() - 5.70378).abs() < 1e-5);
    }

    #[test]
    fn layer_norm_constant_vector() {
        let mut g = Graph::new();
        let x = g.constant(arr(&[vec![3.0; 5]]));
        let gain = g.constant(arr(&[vec![1.0; 5]]));
        let bias = g.constant(arr(&[vec![0.0; 5]]));
        let y = g.layer_norm(x, gain, bias, 1e-5).unwrap();
        assert!(g.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut g = Graph::<f64>::new();
        let a = g.constant(Array::zeros(&[2, 3]));
        let b = g.constant(Array::zeros(&[4, 5]));
        let msg = g.matmul(a, b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[4, 5]"), "{msg}");
    }

    #[test]
    fn linear_map_gradient_is_broadcast_input() {
        // loss = sum(W x), dL/dW[i][k] = x[k]
        let mut g = Graph::new();
        let x = g.constant(arr(&[vec![1.0, -2.0, 0.5]]));
        let w = g.input(Array::zeros(&[3, 4]));
        let y = g.matmul(x, w).unwrap();
        let l = g.sum(y);
        let grads = g.backward(l).unwrap();
        let gw = grads.get(w).unwrap();
        for k in 0..3 {
            for j in 0..4 {
                assert_eq!(gw.get2(k, j), [1.0, -2.0, 0.5][k]);
            }
        }
        assert!(grads.get(x).is_none());
    }

    #[test]
    fn backward_twice_is_error() {
        let mut g = Graph::new();
        let x = g.input(arr(&[vec![1.0]]));
        let l = g.sum(x);
        g.backward(l).unwrap();
        assert!(g.backward(l).is_err());
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::new();
        let x = g.input(arr(&[vec![1.0, 2.0]]));
        assert!(g.backward(x).unwrap_err().to_string().contains("scalar"));
    }

    #[test]
    fn causal_softmax_masks_future() {
        let mut g = Graph::<f64>::new();
        let s = g.constant(Array::zeros(&[3, 3]));
        let p = g.causal_softmax(s).unwrap();
        let v = g.value(p);
        assert_eq!(v.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(v.row(1), &[0.5, 0.5, 0.0]);
        assert!((v.row(2)[2] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn causal_softmax_nan_aborts() {
        let mut g = Graph::new();
        let s = g.constant(arr(&[vec![f64::NAN, 0.0], vec![0.0, 0.0]]));
        let err = g.causal_softmax(s).unwrap_err().to_string();
        assert!(err.contains("row 0"), "{err}");
    }

    #[test]
    fn shared_param_gradient_accumulates() {
        let mut store = ParamStore::new();
        let id = store.add("w", arr(&[vec![2.0]]));
        let mut g = Graph::new();
        let a = g.param(&store, id);
        let b = g.param(&store, id);
        assert_eq!(a, b);
        let y = g.mul(a, b).unwrap();
        let l = g.sum(y);
        let grads = g.backward(l).unwrap();
        assert_eq!(grads.param_grads(&store)[0].data(), &[4.0]);
    }
}
