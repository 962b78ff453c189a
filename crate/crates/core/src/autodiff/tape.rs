use alloc::vec;
use alloc::vec::Vec;

use super::kernels::{matmul, matmul_a_bt, matmul_at_b};
use super::{Scalar, Tensor};
use crate::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Per-column batch statistics produced by [`Tape::batch_norm`].
#[derive(Clone, Debug, PartialEq)]
pub struct BnStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Broadcast {
    Same,
    /// Right operand is a row vector added to every row of the left.
    Row,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var, Broadcast),
    Sub(Var, Var, Broadcast),
    Mul(Var, Var),
    ScalarMul(Var, T),
    AddScalar(Var),
    Concat {
        inputs: Vec<Var>,
        outer: usize,
        inner: usize,
        sizes: Vec<usize>,
    },
    Relu(Var),
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<T>,
        inv_std: Vec<T>,
        /// Batch statistics (training) or fixed statistics (inference).
        batch: bool,
    },
    ReduceMax {
        x: Var,
        argmax: Vec<usize>,
    },
    GatherRows {
        x: Var,
        indices: Vec<usize>,
    },
    Square(Var),
    ReduceMean(Var),
    Log(Var),
    Sigmoid(Var),
    Clamp {
        x: Var,
        lo: T,
        hi: T,
    },
    Reshape(Var),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Record of executed primitives. Single-threaded; one tape per forward pass.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Tape::new()
    }
}

/// Gradients of a scalar loss with respect to every recorded value that
/// depends on a parameter.
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn shape_err(op: &'static str, shapes: &[&[usize]]) -> Error {
    Error::Shape {
        op,
        shapes: shapes.iter().map(|s| s.to_vec()).collect(),
    }
}

fn dims_2d(op: &'static str, s: &[usize]) -> Result<(usize, usize)> {
    match *s {
        [r, c] => Ok((r, c)),
        _ => Err(shape_err(op, &[s])),
    }
}

fn accumulate<T: Scalar>(slot: &mut Option<Tensor<T>>, shape: &[usize], f: impl FnOnce(&mut [T])) {
    let t = slot.get_or_insert_with(|| Tensor::zeros(shape));
    f(t.data_mut());
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op_name: &'static str, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::non_finite(alloc::format!("output of {op_name}")));
        }
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node { value, op, needs_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    fn leaf(&mut self, value: Tensor<T>, needs_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::non_finite("leaf tensor"));
        }
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A value gradients are requested for.
    pub fn param(&mut self, value: Tensor<T>) -> Result<Var> {
        self.leaf(value, true)
    }

    /// A value treated as fixed data.
    pub fn constant(&mut self, value: Tensor<T>) -> Result<Var> {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Flat input indices selected by a `reduce_max`.
    pub fn argmax(&self, v: Var) -> Option<&[usize]> {
        match &self.nodes[v.0].op {
            Op::ReduceMax { argmax, .. } => Some(argmax),
            _ => None,
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let (m, k) = dims_2d("matmul", sa)?;
        let (k2, n) = dims_2d("matmul", sb)?;
        if k != k2 {
            return Err(shape_err("matmul", &[sa, sb]));
        }
        let out = matmul(self.value(a).data(), self.value(b).data(), m, k, n);
        self.push("matmul", Tensor::new(&[m, n], out)?, Op::MatMul(a, b), &[a, b])
    }

    fn broadcast_kind(&self, op: &'static str, a: Var, b: Var) -> Result<Broadcast> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa == sb {
            return Ok(Broadcast::Same);
        }
        if sb.len() == 1 && sa.len() == 2 && sa[1] == sb[0] {
            return Ok(Broadcast::Row);
        }
        Err(shape_err(op, &[sa, sb]))
    }

    fn binary(&mut self, op_name: &'static str, a: Var, b: Var, sign: T) -> Result<Var> {
        let bc = self.broadcast_kind(op_name, a, b)?;
        let av = self.value(a);
        let bv = self.value(b).data();
        let mut out = av.data().to_vec();
        match bc {
            Broadcast::Same => {
                for (o, &y) in out.iter_mut().zip(bv) {
                    *o = *o + sign * y;
                }
            }
            Broadcast::Row => {
                let w = bv.len();
                for row in out.chunks_mut(w) {
                    for (o, &y) in row.iter_mut().zip(bv) {
                        *o = *o + sign * y;
                    }
                }
            }
        }
        let t = Tensor::new(av.shape(), out)?;
        let op = if sign > T::zero() { Op::Add(a, b, bc) } else { Op::Sub(a, b, bc) };
        self.push(op_name, t, op, &[a, b])
    }

    /// `a + b`; `b` may be a row vector broadcast over the rows of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, T::one())
    }

    /// `a − b`; `b` may be a row vector broadcast over the rows of `a`.
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, -T::one())
    }

    /// Elementwise product of equal shapes.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err("mul", &[sa, sb]));
        }
        let out = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x * y)
            .collect();
        let t = Tensor::new(self.shape(a), out)?;
        self.push("mul", t, Op::Mul(a, b), &[a, b])
    }

    pub fn scalar_mul(&mut self, a: Var, c: T) -> Result<Var> {
        let t = self.value(a).map(|v| v * c);
        self.push("scalar_mul", t, Op::ScalarMul(a, c), &[a])
    }

    pub fn add_scalar(&mut self, a: Var, c: T) -> Result<Var> {
        let t = self.value(a).map(|v| v + c);
        self.push("add_scalar", t, Op::AddScalar(a), &[a])
    }

    /// Concatenate along `axis`; all other dimensions must agree.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = *inputs.first().ok_or(Error::Empty { what: "concat inputs" })?;
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return Err(shape_err("concat", &[&base]));
        }
        let mut sizes = Vec::with_capacity(inputs.len());
        for &v in inputs {
            let s = self.shape(v);
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(d, (x, y))| d == axis || x == y);
            if !compatible {
                let shapes: Vec<&[usize]> = inputs.iter().map(|&v| self.shape(v)).collect();
                return Err(shape_err("concat", &shapes));
            }
            sizes.push(s[axis]);
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let total: usize = sizes.iter().sum();
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (&v, &sz) in inputs.iter().zip(&sizes) {
                let d = self.value(v).data();
                out.extend_from_slice(&d[o * sz * inner..(o + 1) * sz * inner]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let t = Tensor::new(&shape, out)?;
        self.push(
            "concat",
            t,
            Op::Concat {
                inputs: inputs.to_vec(),
                outer,
                inner,
                sizes,
            },
            inputs,
        )
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a).map(|v| if v > T::zero() { v } else { T::zero() });
        self.push("relu", t, Op::Relu(a), &[a])
    }

    fn check_bn(&self, x: Var, gamma: Var, beta: Var) -> Result<(usize, usize)> {
        let (n, d) = dims_2d("batch_norm", self.shape(x))?;
        if self.shape(gamma) != [d] || self.shape(beta) != [d] {
            return Err(shape_err("batch_norm", &[self.shape(x), self.shape(gamma), self.shape(beta)]));
        }
        Ok((n, d))
    }

    fn bn_apply(&mut self, x: Var, gamma: Var, beta: Var, mean: &[T], inv_std: Vec<T>, batch: bool) -> Result<Var> {
        let (n, d) = dims_2d("batch_norm", self.shape(x))?;
        let xv = self.value(x).data();
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let mut xhat = vec![T::zero(); n * d];
        let mut out = vec![T::zero(); n * d];
        for r in 0..n {
            for c in 0..d {
                let h = (xv[r * d + c] - mean[c]) * inv_std[c];
                xhat[r * d + c] = h;
                out[r * d + c] = g[c] * h + b[c];
            }
        }
        let t = Tensor::new(&[n, d], out)?;
        self.push(
            "batch_norm",
            t,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch,
            },
            &[x, gamma, beta],
        )
    }

    /// Training-mode batch normalisation over the rows of an n×d input, using
    /// the biased batch variance. Returns the batch statistics for running
    /// averages.
    pub fn batch_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<(Var, BnStats)> {
        let (n, d) = self.check_bn(x, gamma, beta)?;
        if n < 2 {
            return Err(Error::invalid("batch_norm", "needs at least two rows in training mode"));
        }
        let xv = self.value(x).data();
        let mut mean = vec![0.0f64; d];
        let mut var = vec![0.0f64; d];
        for r in 0..n {
            for c in 0..d {
                mean[c] += xv[r * d + c].as_f64();
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        for r in 0..n {
            for c in 0..d {
                let t = xv[r * d + c].as_f64() - mean[c];
                var[c] += t * t;
            }
        }
        for v in &mut var {
            *v /= n as f64;
        }
        let mean_t: Vec<T> = mean.iter().map(|&m| T::of_f64(m)).collect();
        let inv_std: Vec<T> = var.iter().map(|&v| T::of_f64(1.0 / libm::sqrt(v + eps))).collect();
        let out = self.bn_apply(x, gamma, beta, &mean_t, inv_std, true)?;
        Ok((out, BnStats { mean, var }))
    }

    /// Inference-mode batch normalisation with fixed statistics (an affine map).
    pub fn batch_norm_inference(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mean: &[f64],
        var: &[f64],
        eps: f64,
    ) -> Result<Var> {
        let (_, d) = self.check_bn(x, gamma, beta)?;
        if mean.len() != d || var.len() != d {
            return Err(shape_err("batch_norm", &[self.shape(x), &[mean.len()], &[var.len()]]));
        }
        let mean_t: Vec<T> = mean.iter().map(|&m| T::of_f64(m)).collect();
        let inv_std: Vec<T> = var.iter().map(|&v| T::of_f64(1.0 / libm::sqrt(v + eps))).collect();
        self.bn_apply(x, gamma, beta, &mean_t, inv_std, false)
    }

    /// Maximum along `axis`, which is removed from the shape. The selected
    /// element (lowest index on ties) receives the whole gradient.
    pub fn reduce_max(&mut self, x: Var, axis: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if axis >= s.len() || s[axis] == 0 {
            return Err(shape_err("reduce_max", &[&s]));
        }
        let outer: usize = s[..axis].iter().product();
        let len = s[axis];
        let inner: usize = s[axis + 1..].iter().product();
        let d = self.value(x).data();
        let mut out = Vec::with_capacity(outer * inner);
        let mut argmax = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = o * len * inner;
            // Walk the reduced axis row by row so the inner loop stays contiguous.
            let mut best: Vec<T> = d[base..base + inner].to_vec();
            let mut arg: Vec<usize> = (base..base + inner).collect();
            for l in 1..len {
                let row = base + l * inner;
                for i in 0..inner {
                    let v = d[row + i];
                    if v > best[i] {
                        best[i] = v;
                        arg[i] = row + i;
                    }
                }
            }
            out.extend_from_slice(&best);
            argmax.extend_from_slice(&arg);
        }
        let mut shape = s;
        shape.remove(axis);
        let t = Tensor::new(&shape, out)?;
        self.push("reduce_max", t, Op::ReduceMax { x, argmax }, &[x])
    }

    /// Rows of `x` (first axis) in the order given; repeats allowed.
    pub fn gather_rows(&mut self, x: Var, indices: &[usize]) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.is_empty() {
            return Err(shape_err("gather_rows", &[&s]));
        }
        let rows = s[0];
        let w: usize = s[1..].iter().product();
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(Error::IndexOutOfRange {
                what: "gather_rows",
                index: bad,
                len: rows,
            });
        }
        let d = self.value(x).data();
        let mut out = Vec::with_capacity(indices.len() * w);
        for &i in indices {
            out.extend_from_slice(&d[i * w..(i + 1) * w]);
        }
        let mut shape = s;
        shape[0] = indices.len();
        let t = Tensor::new(&shape, out)?;
        self.push(
            "gather_rows",
            t,
            Op::GatherRows {
                x,
                indices: indices.to_vec(),
            },
            &[x],
        )
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x).map(|v| v * v);
        self.push("square", t, Op::Square(x), &[x])
    }

    /// Mean of every element, as a scalar.
    pub fn reduce_mean(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        if v.is_empty() {
            return Err(shape_err("reduce_mean", &[v.shape()]));
        }
        let mut s = T::zero();
        for &e in v.data() {
            s = s + e;
        }
        let m = s / T::of_f64(v.len() as f64);
        self.push("reduce_mean", Tensor::scalar(m), Op::ReduceMean(x), &[x])
    }

    /// Natural log; every input must be positive.
    pub fn log(&mut self, x: Var) -> Result<Var> {
        if self.value(x).data().iter().any(|&v| !(v > T::zero())) {
            return Err(Error::non_finite("log of non-positive value"));
        }
        let t = self.value(x).map(|v| v.ln());
        self.push("log", t, Op::Log(x), &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x).map(|v| {
            if v >= T::zero() {
                T::one() / (T::one() + (-v).exp())
            } else {
                let e = v.exp();
                e / (T::one() + e)
            }
        });
        self.push("sigmoid", t, Op::Sigmoid(x), &[x])
    }

    /// Clamp to `[lo, hi]`; gradient passes only where the input is inside.
    pub fn clamp(&mut self, x: Var, lo: T, hi: T) -> Result<Var> {
        let t = self.value(x).map(|v| v.max(lo).min(hi));
        self.push("clamp", t, Op::Clamp { x, lo, hi }, &[x])
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).clone().reshape(shape)?;
        self.push("reshape", t, Op::Reshape(x), &[x])
    }

    /// Reverse sweep from a single-element `loss`. Consumes the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients<T>> {
        let Tape { nodes } = self;
        let lv = &nodes[loss.0].value;
        if lv.len() != 1 {
            return Err(shape_err("backward", &[lv.shape()]));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(lv.shape(), T::one()));

        for id in (0..=loss.0).rev() {
            let node = &nodes[id];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            let gd = g.data();
            let want = |v: Var| nodes[v.0].needs_grad;
            let shape_of = |v: Var| nodes[v.0].value.shape();
            match &node.op {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let (m, k) = dims_2d("matmul", shape_of(*a))?;
                    let n = shape_of(*b)[1];
                    if want(*a) {
                        let da = matmul_a_bt(gd, nodes[b.0].value.data(), m, n, k);
                        accumulate(&mut grads[a.0], &[m, k], |t| add_into(t, &da));
                    }
                    if want(*b) {
                        let db = matmul_at_b(nodes[a.0].value.data(), gd, m, k, n);
                        accumulate(&mut grads[b.0], &[k, n], |t| add_into(t, &db));
                    }
                }
                Op::Add(a, b, bc) | Op::Sub(a, b, bc) => {
                    let sign = if matches!(node.op, Op::Add(..)) { T::one() } else { -T::one() };
                    if want(*a) {
                        accumulate(&mut grads[a.0], shape_of(*a), |t| add_into(t, gd));
                    }
                    if want(*b) {
                        let sb = shape_of(*b).to_vec();
                        accumulate(&mut grads[b.0], &sb, |t| match bc {
                            Broadcast::Same => {
                                for (o, &x) in t.iter_mut().zip(gd) {
                                    *o = *o + sign * x;
                                }
                            }
                            Broadcast::Row => {
                                for row in gd.chunks(t.len()) {
                                    for (o, &x) in t.iter_mut().zip(row) {
                                        *o = *o + sign * x;
                                    }
                                }
                            }
                        });
                    }
                }
                Op::Mul(a, b) => {
                    if want(*a) {
                        let bv = nodes[b.0].value.data();
                        accumulate(&mut grads[a.0], shape_of(*a), |t| {
                            for ((o, &x), &y) in t.iter_mut().zip(gd).zip(bv) {
                                *o = *o + x * y;
                            }
                        });
                    }
                    if want(*b) {
                        let av = nodes[a.0].value.data();
                        accumulate(&mut grads[b.0], shape_of(*b), |t| {
                            for ((o, &x), &y) in t.iter_mut().zip(gd).zip(av) {
                                *o = *o + x * y;
                            }
                        });
                    }
                }
                Op::ScalarMul(a, c) => {
                    let c = *c;
                    accumulate(&mut grads[a.0], shape_of(*a), |t| {
                        for (o, &x) in t.iter_mut().zip(gd) {
                            *o = *o + c * x;
                        }
                    });
                }
                Op::AddScalar(a) | Op::Reshape(a) => {
                    accumulate(&mut grads[a.0], shape_of(*a), |t| add_into(t, gd));
                }
                Op::Concat {
                    inputs,
                    outer,
                    inner,
                    sizes,
                } => {
                    let total: usize = sizes.iter().sum();
                    let mut off = 0;
                    for (&v, &sz) in inputs.iter().zip(sizes) {
                        if want(v) {
                            accumulate(&mut grads[v.0], shape_of(v), |t| {
                                for o in 0..*outer {
                                    let src = &gd[(o * total + off) * inner..(o * total + off + sz) * inner];
                                    add_into(&mut t[o * sz * inner..(o + 1) * sz * inner], src);
                                }
                            });
                        }
                        off += sz;
                    }
                }
                Op::Relu(a) => {
                    let av = nodes[a.0].value.data();
                    accumulate(&mut grads[a.0], shape_of(*a), |t| {
                        for ((o, &x), &v) in t.iter_mut().zip(gd).zip(av) {
                            if v > T::zero() {
                                *o = *o + x;
                            }
                        }
                    });
                }
                Op::BatchNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                    batch,
                } => {
                    let (n, d) = dims_2d("batch_norm", shape_of(*x))?;
                    let gam = nodes[gamma.0].value.data();
                    let mut sum_g = vec![T::zero(); d];
                    let mut sum_gx = vec![T::zero(); d];
                    for r in 0..n {
                        for c in 0..d {
                            let gv = gd[r * d + c];
                            sum_g[c] = sum_g[c] + gv;
                            sum_gx[c] = sum_gx[c] + gv * xhat[r * d + c];
                        }
                    }
                    if want(*beta) {
                        accumulate(&mut grads[beta.0], &[d], |t| add_into(t, &sum_g));
                    }
                    if want(*gamma) {
                        accumulate(&mut grads[gamma.0], &[d], |t| add_into(t, &sum_gx));
                    }
                    if want(*x) {
                        let nf = T::of_f64(n as f64);
                        accumulate(&mut grads[x.0], &[n, d], |t| {
                            for r in 0..n {
                                for c in 0..d {
                                    let i = r * d + c;
                                    let k = gam[c] * inv_std[c];
                                    let v = if *batch {
                                        k * (gd[i] - sum_g[c] / nf - xhat[i] * sum_gx[c] / nf)
                                    } else {
                                        k * gd[i]
                                    };
                                    t[i] = t[i] + v;
                                }
                            }
                        });
                    }
                }
                Op::ReduceMax { x, argmax } => {
                    accumulate(&mut grads[x.0], shape_of(*x), |t| {
                        for (&src, &gv) in argmax.iter().zip(gd) {
                            t[src] = t[src] + gv;
                        }
                    });
                }
                Op::GatherRows { x, indices } => {
                    let w: usize = shape_of(*x)[1..].iter().product();
                    accumulate(&mut grads[x.0], shape_of(*x), |t| {
                        for (r, &i) in indices.iter().enumerate() {
                            add_into(&mut t[i * w..(i + 1) * w], &gd[r * w..(r + 1) * w]);
                        }
                    });
                }
                Op::Square(a) => {
                    let av = nodes[a.0].value.data();
                    let two = T::of_f64(2.0);
                    accumulate(&mut grads[a.0], shape_of(*a), |t| {
                        for ((o, &x), &v) in t.iter_mut().zip(gd).zip(av) {
                            *o = *o + two * v * x;
                        }
                    });
                }
                Op::ReduceMean(a) => {
                    let n = nodes[a.0].value.len();
                    let g0 = gd[0] / T::of_f64(n as f64);
                    accumulate(&mut grads[a.0], shape_of(*a), |t| {
                        for o in t.iter_mut() {
                            *o = *o + g0;
                        }
                    });
                }
                Op::Log(a) => {
                    let av = nodes[a.0].value.data();
                    accumulate(&mut grads[a.0], shape_of(*a), |t| {
                        for ((o, &x), &v) in t.iter_mut().zip(gd).zip(av) {
                            *o = *o + x / v;
                        }
                    });
                }
                Op::Sigmoid(a) => {
                    let yv = node.value.data();
                    accumulate(&mut grads[a.0], shape_of(*a), |t| {
                        for ((o, &x), &y) in t.iter_mut().zip(gd).zip(yv) {
                            *o = *o + x * y * (T::one() - y);
                        }
                    });
                }
                Op::Clamp { x, lo, hi } => {
                    let av = nodes[x.0].value.data();
                    let (lo, hi) = (*lo, *hi);
                    accumulate(&mut grads[x.0], shape_of(*x), |t| {
                        for ((o, &g), &v) in t.iter_mut().zip(gd).zip(av) {
                            if v >= lo && v <= hi {
                                *o = *o + g;
                            }
                        }
                    });
                }
            }
            // Intermediate gradients are not kept.
        }
        Ok(Gradients { grads })
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (o, &x) in dst.iter_mut().zip(src) {
        *o = *o + x;
    }
}
