//! Reverse-mode autodiff over whole matrices.
//!
//! Every op appends a node holding its output value; inputs are always
//! recorded before their consumers, so walking the node list backwards is a
//! valid reverse topological order.

use std::sync::Arc;

use super::{DenseMatrix, Scalar, SparseMatrix};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Constant,
    Param,
    Spmm(Arc<SparseMatrix<T>>, Var),
    MatMul(Var, Var),
    AddRowBias(Var, Var),
    Add(Var, Var),
    Hadamard(Var, Var),
    ConcatCols(Vec<Var>),
    Elu(Var),
    Relu(Var),
    Sigmoid(Var),
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        x_hat: DenseMatrix<T>,
        inv_std: Vec<f64>,
    },
    GatherRows(Var, Vec<usize>),
    RowDot(Var, Var),
    Dropout(Var, DenseMatrix<T>),
    Sum(Var),
    Scale(Var, f64),
    BceWithLogits(Var, f64),
    Mse(Var, DenseMatrix<T>),
    SoftmaxCrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: DenseMatrix<T>,
    },
}

struct Node<T> {
    value: DenseMatrix<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Records a forward computation so that [`Tape::backward`] can replay it in
/// reverse. A tape supports a single backward pass.
pub struct Tape<T = f32> {
    nodes: Vec<Node<T>>,
    consumed: bool,
}

/// Gradients of a scalar loss with respect to every parameter leaf.
#[derive(Debug)]
pub struct Gradients<T = f32> {
    grads: Vec<Option<DenseMatrix<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&DenseMatrix<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<DenseMatrix<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn sigmoid_f64(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: DenseMatrix<T>, op: Op<T>, requires_grad: bool) -> Var {
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

    pub fn value(&self, v: Var) -> &DenseMatrix<T> {
        &self.nodes[v.0].value
    }

    /// Value of a 1x1 node as `f64`.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.get(0, 0).as_f64()
    }

    /// Non-differentiable input.
    pub fn constant(&mut self, value: DenseMatrix<T>) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// Differentiable leaf; receives a gradient from [`Tape::backward`].
    pub fn param(&mut self, value: DenseMatrix<T>) -> Var {
        self.push(value, Op::Param, true)
    }

    /// Sparse-dense product; the sparse operand is a constant.
    pub fn spmm(&mut self, a: Arc<SparseMatrix<T>>, x: Var) -> Result<Var> {
        let y = a.spmm(self.value(x))?;
        let rg = self.rg(x);
        Ok(self.push(y, Op::Spmm(a, x), rg))
    }

    pub fn matmul(&mut self, x: Var, w: Var) -> Result<Var> {
        let y = self.value(x).matmul(self.value(w))?;
        let rg = self.rg(x) || self.rg(w);
        Ok(self.push(y, Op::MatMul(x, w), rg))
    }

    /// Adds a 1 x cols bias row to every row of `x`.
    pub fn add_row_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(b));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(Error::shape(
                "add_row_bias",
                format!("bias {}x{} for {}x{}", bv.rows(), bv.cols(), xv.rows(), xv.cols()),
            ));
        }
        let mut y = xv.clone();
        let bias = bv.row(0);
        for i in 0..y.rows() {
            for (o, &bb) in y.row_mut(i).iter_mut().zip(bias) {
                *o = *o + bb;
            }
        }
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(y, Op::AddRowBias(x, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.value(a).check_same_shape(self.value(b), "add")?;
        let y = self.value(a).zip_map(self.value(b), |p, q| p + q);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(y, Op::Add(a, b), rg))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.value(a).check_same_shape(self.value(b), "hadamard")?;
        let y = self.value(a).zip_map(self.value(b), |p, q| p * q);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(y, Op::Hadamard(a, b), rg))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let mats: Vec<&DenseMatrix<T>> = parts.iter().map(|&p| self.value(p)).collect();
        let y = DenseMatrix::hconcat(&mats)?;
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(y, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// ELU with alpha = 1.
    pub fn elu(&mut self, x: Var) -> Var {
        let y = self.value(x).map(|t| {
            if t >= T::zero() {
                t
            } else {
                T::from_f64(t.as_f64().exp_m1())
            }
        });
        let rg = self.rg(x);
        self.push(y, Op::Elu(x), rg)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = self.value(x).map(|t| t.max(T::zero()));
        let rg = self.rg(x);
        self.push(y, Op::Relu(x), rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let y = self.value(x).map(|t| T::from_f64(sigmoid_f64(t.as_f64())));
        let rg = self.rg(x);
        self.push(y, Op::Sigmoid(x), rg)
    }

    /// Training-mode batch normalization over rows, per column.
    /// `gamma` and `beta` are 1 x cols.
    pub fn batch_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let xv = self.value(x);
        let (n, c) = xv.shape();
        if n < 2 {
            return Err(Error::shape("batch_norm", format!("needs at least 2 rows, got {n}")));
        }
        for (name, p) in [("gamma", gamma), ("beta", beta)] {
            let pv = self.value(p);
            if pv.shape() != (1, c) {
                return Err(Error::shape(
                    "batch_norm",
                    format!("{name} is {}x{}, expected 1x{c}", pv.rows(), pv.cols()),
                ));
            }
        }
        let mut mean = vec![0f64; c];
        for i in 0..n {
            for (m, &v) in mean.iter_mut().zip(xv.row(i)) {
                *m += v.as_f64();
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0f64; c];
        for i in 0..n {
            for ((s, &v), &m) in var.iter_mut().zip(xv.row(i)).zip(&mean) {
                let d = v.as_f64() - m;
                *s += d * d;
            }
        }
        let inv_std: Vec<f64> = var
            .iter()
            .map(|s| 1.0 / (s / n as f64 + eps).sqrt())
            .collect();
        let mut x_hat = DenseMatrix::zeros(n, c);
        let mut y = DenseMatrix::zeros(n, c);
        let (g, b) = (self.value(gamma).row(0), self.value(beta).row(0));
        for i in 0..n {
            for j in 0..c {
                let h = (xv.get(i, j).as_f64() - mean[j]) * inv_std[j];
                x_hat.set(i, j, T::from_f64(h));
                y.set(i, j, T::from_f64(g[j].as_f64() * h + b[j].as_f64()));
            }
        }
        let rg = self.rg(x) || self.rg(gamma) || self.rg(beta);
        Ok(self.push(
            y,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                x_hat,
                inv_std,
            },
            rg,
        ))
    }

    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let y = self.value(x).gather_rows(idx)?;
        let rg = self.rg(x);
        Ok(self.push(y, Op::GatherRows(x, idx.to_vec()), rg))
    }

    /// Row-wise inner product: n x c, n x c -> n x 1.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        av.check_same_shape(bv, "row_dot")?;
        let data = (0..av.rows())
            .map(|i| {
                let s: f64 = av
                    .row(i)
                    .iter()
                    .zip(bv.row(i))
                    .map(|(&p, &q)| p.as_f64() * q.as_f64())
                    .sum();
                T::from_f64(s)
            })
            .collect();
        let y = DenseMatrix::from_vec(av.rows(), 1, data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(y, Op::RowDot(a, b), rg))
    }

    /// Multiplies by a fixed mask (already scaled by 1/keep).
    pub fn dropout(&mut self, x: Var, mask: DenseMatrix<T>) -> Result<Var> {
        self.value(x).check_same_shape(&mask, "dropout")?;
        let y = self.value(x).zip_map(&mask, |p, q| p * q);
        let rg = self.rg(x);
        Ok(self.push(y, Op::Dropout(x, mask), rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        let rg = self.rg(x);
        self.push(DenseMatrix::filled(1, 1, T::from_f64(s)), Op::Sum(x), rg)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let y = self.value(x).map(|t| T::from_f64(t.as_f64() * c));
        let rg = self.rg(x);
        self.push(y, Op::Scale(x, c), rg)
    }

    /// Mean binary cross-entropy of every entry of `logits` against a single
    /// target (0 or 1), evaluated in the log-sum-exp form.
    pub fn bce_with_logits(&mut self, logits: Var, target: f64) -> Result<Var> {
        let lv = self.value(logits);
        let n = lv.as_slice().len();
        if n == 0 {
            return Err(Error::shape("bce_with_logits", "no logits"));
        }
        let s: f64 = lv
            .as_slice()
            .iter()
            .map(|&x| {
                let x = x.as_f64();
                x.max(0.0) - x * target + (-x.abs()).exp().ln_1p()
            })
            .sum();
        let rg = self.rg(logits);
        Ok(self.push(
            DenseMatrix::filled(1, 1, T::from_f64(s / n as f64)),
            Op::BceWithLogits(logits, target),
            rg,
        ))
    }

    /// Mean squared error over all entries.
    pub fn mse(&mut self, pred: Var, target: DenseMatrix<T>) -> Result<Var> {
        let pv = self.value(pred);
        pv.check_same_shape(&target, "mse")?;
        let n = pv.as_slice().len();
        if n == 0 {
            return Err(Error::shape("mse", "empty input"));
        }
        let s: f64 = pv
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .map(|(&p, &t)| {
                let d = p.as_f64() - t.as_f64();
                d * d
            })
            .sum();
        let rg = self.rg(pred);
        Ok(self.push(
            DenseMatrix::filled(1, 1, T::from_f64(s / n as f64)),
            Op::Mse(pred, target),
            rg,
        ))
    }

    /// Mean multinomial cross-entropy of row-wise softmax against class labels.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        let (n, c) = lv.shape();
        if labels.len() != n || n == 0 {
            return Err(Error::shape(
                "softmax_cross_entropy",
                format!("{} labels for {n} rows", labels.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::shape(
                "softmax_cross_entropy",
                format!("label {bad} out of range for {c} classes"),
            ));
        }
        let mut probs = DenseMatrix::zeros(n, c);
        let mut total = 0f64;
        for i in 0..n {
            let row = lv.row(i);
            let m = row
                .iter()
                .map(|x| x.as_f64())
                .fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|x| (x.as_f64() - m).exp()).sum();
            let log_z = m + z.ln();
            for (j, x) in row.iter().enumerate() {
                probs.set(i, j, T::from_f64((x.as_f64() - log_z).exp()));
            }
            total += log_z - row[labels[i]].as_f64();
        }
        let rg = self.rg(logits);
        Ok(self.push(
            DenseMatrix::filled(1, 1, T::from_f64(total / n as f64)),
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            rg,
        ))
    }

    /// Propagates d(loss)/d(node) back to every parameter leaf. Parameters
    /// the loss does not depend on receive zero gradients.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>> {
        if self.consumed {
            return Err(Error::Backward("tape already consumed"));
        }
        if loss.0 >= self.nodes.len() {
            return Err(Error::Backward("loss does not belong to this tape"));
        }
        if self.value(loss).shape() != (1, 1) {
            return Err(Error::Backward("loss is not a scalar"));
        }
        self.consumed = true;

        let mut grads: Vec<Option<DenseMatrix<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(DenseMatrix::filled(1, 1, T::one()));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Param) {
                continue;
            }
            let Some(dy) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &dy, &mut grads)?;
        }

        let grads = self
            .nodes
            .iter()
            .zip(grads)
            .map(|(node, g)| match node.op {
                Op::Param => Some(g.unwrap_or_else(|| {
                    DenseMatrix::zeros(node.value.rows(), node.value.cols())
                })),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn propagate(
        &self,
        idx: usize,
        dy: &DenseMatrix<T>,
        grads: &mut [Option<DenseMatrix<T>>],
    ) -> Result<()> {
        let node = &self.nodes[idx];
        let y = &node.value;
        match &node.op {
            Op::Constant | Op::Param => {}
            Op::Spmm(a, x) => {
                if self.rg(*x) {
                    let g = a.transpose().spmm(dy)?;
                    accumulate(grads, *x, g);
                }
            }
            Op::MatMul(x, w) => {
                if self.rg(*x) {
                    let g = dy.matmul(&self.value(*w).transpose())?;
                    accumulate(grads, *x, g);
                }
                if self.rg(*w) {
                    let g = self.value(*x).transpose().matmul(dy)?;
                    accumulate(grads, *w, g);
                }
            }
            Op::AddRowBias(x, b) => {
                if self.rg(*x) {
                    accumulate(grads, *x, dy.clone());
                }
                if self.rg(*b) {
                    accumulate(grads, *b, column_sums(dy));
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if self.rg(v) {
                        accumulate(grads, v, dy.clone());
                    }
                }
            }
            Op::Hadamard(a, b) => {
                if self.rg(*a) {
                    accumulate(grads, *a, dy.zip_map(self.value(*b), |g, q| g * q));
                }
                if self.rg(*b) {
                    accumulate(grads, *b, dy.zip_map(self.value(*a), |g, p| g * p));
                }
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    if self.rg(p) {
                        let g = DenseMatrix::from_fn(dy.rows(), w, |i, j| dy.get(i, start + j));
                        accumulate(grads, p, g);
                    }
                    start += w;
                }
            }
            Op::Elu(x) => {
                let g = dy.zip_map(y, |g, out| if out >= T::zero() { g } else { g * (out + T::one()) });
                accumulate(grads, *x, g);
            }
            Op::Relu(x) => {
                let g = dy.zip_map(self.value(*x), |g, t| if t > T::zero() { g } else { T::zero() });
                accumulate(grads, *x, g);
            }
            Op::Sigmoid(x) => {
                let g = dy.zip_map(y, |g, s| g * s * (T::one() - s));
                accumulate(grads, *x, g);
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                x_hat,
                inv_std,
            } => {
                let (n, c) = dy.shape();
                let mut sum_dy = vec![0f64; c];
                let mut sum_dy_xhat = vec![0f64; c];
                for i in 0..n {
                    for j in 0..c {
                        let g = dy.get(i, j).as_f64();
                        sum_dy[j] += g;
                        sum_dy_xhat[j] += g * x_hat.get(i, j).as_f64();
                    }
                }
                if self.rg(*x) {
                    let gam = self.value(*gamma).row(0);
                    let nf = n as f64;
                    let g = DenseMatrix::from_fn(n, c, |i, j| {
                        let k = gam[j].as_f64() * inv_std[j] / nf;
                        T::from_f64(
                            k * (nf * dy.get(i, j).as_f64()
                                - sum_dy[j]
                                - x_hat.get(i, j).as_f64() * sum_dy_xhat[j]),
                        )
                    });
                    accumulate(grads, *x, g);
                }
                if self.rg(*gamma) {
                    let g = DenseMatrix::from_fn(1, c, |_, j| T::from_f64(sum_dy_xhat[j]));
                    accumulate(grads, *gamma, g);
                }
                if self.rg(*beta) {
                    let g = DenseMatrix::from_fn(1, c, |_, j| T::from_f64(sum_dy[j]));
                    accumulate(grads, *beta, g);
                }
            }
            Op::GatherRows(x, rows) => {
                let xv = self.value(*x);
                let mut g = DenseMatrix::zeros(xv.rows(), xv.cols());
                for (r, &src) in rows.iter().enumerate() {
                    for (o, &d) in g.row_mut(src).iter_mut().zip(dy.row(r)) {
                        *o = *o + d;
                    }
                }
                accumulate(grads, *x, g);
            }
            Op::RowDot(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.rg(*a) {
                    let g = DenseMatrix::from_fn(av.rows(), av.cols(), |i, j| dy.get(i, 0) * bv.get(i, j));
                    accumulate(grads, *a, g);
                }
                if self.rg(*b) {
                    let g = DenseMatrix::from_fn(bv.rows(), bv.cols(), |i, j| dy.get(i, 0) * av.get(i, j));
                    accumulate(grads, *b, g);
                }
            }
            Op::Dropout(x, mask) => {
                accumulate(grads, *x, dy.zip_map(mask, |g, m| g * m));
            }
            Op::Sum(x) => {
                let xv = self.value(*x);
                accumulate(grads, *x, DenseMatrix::filled(xv.rows(), xv.cols(), dy.get(0, 0)));
            }
            Op::Scale(x, c) => {
                let c = *c;
                accumulate(grads, *x, dy.map(|g| T::from_f64(g.as_f64() * c)));
            }
            Op::BceWithLogits(x, target) => {
                let xv = self.value(*x);
                let k = dy.get(0, 0).as_f64() / xv.as_slice().len() as f64;
                let t = *target;
                let g = xv.map(|z| T::from_f64(k * (sigmoid_f64(z.as_f64()) - t)));
                accumulate(grads, *x, g);
            }
            Op::Mse(p, target) => {
                let pv = self.value(*p);
                let k = 2.0 * dy.get(0, 0).as_f64() / pv.as_slice().len() as f64;
                let g = pv.zip_map(target, |a, b| T::from_f64(k * (a.as_f64() - b.as_f64())));
                accumulate(grads, *p, g);
            }
            Op::SoftmaxCrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let k = dy.get(0, 0).as_f64() / labels.len() as f64;
                let mut g = probs.map(|p| T::from_f64(p.as_f64() * k));
                for (i, &l) in labels.iter().enumerate() {
                    g.set(i, l, T::from_f64((probs.get(i, l).as_f64() - 1.0) * k));
                }
                accumulate(grads, *logits, g);
            }
        }
        Ok(())
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<DenseMatrix<T>>], v: Var, g: DenseMatrix<T>) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn column_sums<T: Scalar>(m: &DenseMatrix<T>) -> DenseMatrix<T> {
    let mut s = vec![0f64; m.cols()];
    for i in 0..m.rows() {
        for (a, &v) in s.iter_mut().zip(m.row(i)) {
            *a += v.as_f64();
        }
    }
    DenseMatrix::from_fn(1, m.cols(), |_, j| T::from_f64(s[j]))
}
