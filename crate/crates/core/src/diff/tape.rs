use std::sync::Arc;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::spectral::FourierPlan;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy)]
enum Broadcast {
    Same,
    Row,
    Scalar,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var, Broadcast),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine(Var, f64),
    Sigmoid(Var),
    Relu(Var),
    Sum(Var),
    Mean(Var),
    L1Mean(Var),
    Conv1d(Var, Var),
    RowMean(Var),
    Reshape(Var),
    ConcatCols(Vec<Var>),
    SliceCols { input: Var, start: usize },
    GatherCols { input: Var, index: Arc<[usize]> },
    ComplexAbs(Var, Var),
    InverseDft { re: Var, im: Var, plan: Arc<FourierPlan> },
    CrossEntropy { logits: Var, target: Vec<f64>, softmax: Vec<f64> },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Wengert list recording a forward computation for reverse-mode
/// differentiation.
///
/// Nodes are appended in evaluation order, so every node's inputs precede
/// it. [`Tape::backward`] is a pure function of the recorded tape: calling it
/// twice returns identical gradients.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to the leaves that require them.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient for a leaf registered with [`Tape::param`]; `None` for
    /// constants.
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, var: Var) -> Option<Vec<f64>> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rows_cols(t: &Tensor) -> (usize, usize) {
    match t.shape() {
        [] => (1, 1),
        [n] => (1, *n),
        [r, c] => (*r, *c),
        s => {
            let c = *s.last().unwrap();
            (t.numel() / c.max(1), c)
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Records a constant input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Records a leaf whose gradient [`Tape::backward`] will report.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2()?;
        let (k2, n) = self.value(b).dims2()?;
        if k != k2 {
            return Err(Error::dim(format!(
                "matmul of {:?} by {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        let (ad, bd) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let av = ad[i * k + p];
                if av != 0.0 {
                    axpy(av, &bd[p * n..(p + 1) * n], row);
                }
            }
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), needs))
    }

    /// Elementwise sum. `b` may also be a row vector broadcast over the rows
    /// of `a`, or a one-element tensor broadcast everywhere.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (_, cols) = rows_cols(ta);
        let mode = if ta.shape() == tb.shape() {
            Broadcast::Same
        } else if tb.numel() == 1 {
            Broadcast::Scalar
        } else if tb.numel() == cols && ta.shape().len() == 2 {
            Broadcast::Row
        } else {
            return Err(Error::dim(format!(
                "cannot add {:?} and {:?}",
                ta.shape(),
                tb.shape()
            )));
        };
        let mut out = ta.data().to_vec();
        match mode {
            Broadcast::Same => out.iter_mut().zip(tb.data()).for_each(|(o, x)| *o += x),
            Broadcast::Scalar => {
                let s = tb.data()[0];
                out.iter_mut().for_each(|o| *o += s);
            }
            Broadcast::Row => out
                .chunks_mut(cols)
                .for_each(|row| row.iter_mut().zip(tb.data()).for_each(|(o, x)| *o += x)),
        }
        let value = Tensor::new(ta.shape().to_vec(), out)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add(a, b, mode), needs))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::dim(format!(
                "{what} of {:?} and {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        Ok(())
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let out = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x - y)
            .collect();
        let value = Tensor::new(self.value(a).shape().to_vec(), out)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Sub(a, b), needs))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let out = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let value = Tensor::new(self.value(a).shape().to_vec(), out)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Mul(a, b), needs))
    }

    /// `scale * a + shift`, elementwise.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let t = self.value(a);
        let data = t.data().iter().map(|x| scale * x + shift).collect();
        let value = Tensor::new(t.shape().to_vec(), data).expect("shape preserved");
        let needs = self.needs(a);
        self.push(value, Op::Affine(a, scale), needs)
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let t = self.value(a);
        let data = t.data().iter().map(|&x| f(x)).collect();
        let value = Tensor::new(t.shape().to_vec(), data).expect("shape preserved");
        let needs = self.needs(a);
        self.push(value, op, needs)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| if x > 0.0 { x } else { 0.0 }, Op::Relu(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let needs = self.needs(a);
        self.push(Tensor::scalar(s), Op::Sum(a), needs)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.numel() as f64;
        let needs = self.needs(a);
        self.push(Tensor::scalar(s), Op::Mean(a), needs)
    }

    /// Mean absolute value.
    pub fn l1_mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().map(|x| x.abs()).sum::<f64>() / t.numel() as f64;
        let needs = self.needs(a);
        self.push(Tensor::scalar(s), Op::L1Mean(a), needs)
    }

    /// Valid cross-correlation of every row of `x` with `kernel`.
    ///
    /// `x` is `[rows, T]` (or a single `[T]` signal) and `kernel` is `[K]`;
    /// the result has `T - K + 1` columns.
    pub fn conv1d(&mut self, x: Var, kernel: Var) -> Result<Var> {
        let (tx, tk) = (self.value(x), self.value(kernel));
        if tk.shape().len() != 1 {
            return Err(Error::dim(format!(
                "conv1d kernel must be 1-D, got {:?}",
                tk.shape()
            )));
        }
        if !matches!(tx.shape().len(), 1 | 2) {
            return Err(Error::dim(format!(
                "conv1d input must be 1-D or 2-D, got {:?}",
                tx.shape()
            )));
        }
        let (rows, t) = rows_cols(tx);
        let k = tk.numel();
        if k == 0 || k > t {
            return Err(Error::dim(format!(
                "conv1d kernel length {k} exceeds signal length {t}"
            )));
        }
        let t_out = t - k + 1;
        let (xd, kd) = (tx.data(), tk.data());
        let mut out = vec![0.0; rows * t_out];
        for r in 0..rows {
            let xr = &xd[r * t..(r + 1) * t];
            let or = &mut out[r * t_out..(r + 1) * t_out];
            for (j, &kj) in kd.iter().enumerate() {
                axpy(kj, &xr[j..j + t_out], or);
            }
        }
        let shape = if tx.shape().len() == 1 {
            vec![t_out]
        } else {
            vec![rows, t_out]
        };
        let needs = self.needs(x) || self.needs(kernel);
        Ok(self.push(Tensor::new(shape, out)?, Op::Conv1d(x, kernel), needs))
    }

    /// Mean of each row: `[rows, cols] -> [rows, 1]`.
    pub fn row_mean(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.value(a).dims2()?;
        let out = self
            .value(a)
            .data()
            .chunks(c)
            .map(|row| row.iter().sum::<f64>() / c as f64)
            .collect();
        let needs = self.needs(a);
        Ok(self.push(Tensor::matrix(r, 1, out)?, Op::RowMean(a), needs))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let value = self.value(a).clone().reshaped(shape)?;
        let needs = self.needs(a);
        Ok(self.push(value, Op::Reshape(a), needs))
    }

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::contract("concat_cols of nothing"));
        }
        let rows = self.value(parts[0]).dims2()?.0;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.value(p).dims2()?;
            if r != rows {
                return Err(Error::dim(format!(
                    "concat_cols row mismatch: {r} vs {rows}"
                )));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(
            Tensor::matrix(rows, total, out)?,
            Op::ConcatCols(parts.to_vec()),
            needs,
        ))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.value(a).dims2()?;
        if start + len > c {
            return Err(Error::dim(format!(
                "column slice {start}..{} out of {c}",
                start + len
            )));
        }
        let d = self.value(a).data();
        let out = (0..r)
            .flat_map(|i| d[i * c + start..i * c + start + len].iter().copied())
            .collect();
        let needs = self.needs(a);
        Ok(self.push(
            Tensor::matrix(r, len, out)?,
            Op::SliceCols { input: a, start },
            needs,
        ))
    }

    /// `out[r, j] = a[r, index[j]]`. The backward pass scatter-adds.
    pub fn gather_cols(&mut self, a: Var, index: Arc<[usize]>) -> Result<Var> {
        let (r, c) = self.value(a).dims2()?;
        if let Some(&bad) = index.iter().find(|&&i| i >= c) {
            return Err(Error::dim(format!("gather index {bad} out of {c} columns")));
        }
        let d = self.value(a).data();
        let n = index.len();
        let mut out = Vec::with_capacity(r * n);
        for i in 0..r {
            out.extend(index.iter().map(|&j| d[i * c + j]));
        }
        let needs = self.needs(a);
        Ok(self.push(
            Tensor::matrix(r, n, out)?,
            Op::GatherCols { input: a, index },
            needs,
        ))
    }

    /// Elementwise modulus of the complex numbers `re + i·im`.
    pub fn complex_abs(&mut self, re: Var, im: Var) -> Result<Var> {
        self.same_shape(re, im, "complex_abs")?;
        let out = self
            .value(re)
            .data()
            .iter()
            .zip(self.value(im).data())
            .map(|(a, b)| a.hypot(*b))
            .collect();
        let value = Tensor::new(self.value(re).shape().to_vec(), out)?;
        let needs = self.needs(re) || self.needs(im);
        Ok(self.push(value, Op::ComplexAbs(re, im), needs))
    }

    /// Row-wise inverse DFT keeping the real part: `(1/T)·Re(Σ_k X_k e^{+2πikt/T})`.
    pub fn inverse_dft(&mut self, re: Var, im: Var, plan: Arc<FourierPlan>) -> Result<Var> {
        self.same_shape(re, im, "inverse_dft")?;
        let (rows, t) = self.value(re).dims2()?;
        if t != plan.len() {
            return Err(Error::dim(format!(
                "inverse_dft over {t} bins with a plan for {}",
                plan.len()
            )));
        }
        let out = plan.inverse_real(self.value(re).data(), self.value(im).data());
        let needs = self.needs(re) || self.needs(im);
        Ok(self.push(
            Tensor::matrix(rows, t, out)?,
            Op::InverseDft { re, im, plan },
            needs,
        ))
    }

    /// Mean over rows of `-Σ_c target_c · log softmax(logits)_c`.
    ///
    /// `target` must hold a probability distribution per row.
    pub fn cross_entropy(&mut self, logits: Var, target: &Tensor) -> Result<Var> {
        let tl = self.value(logits);
        if tl.shape() != target.shape() {
            return Err(Error::dim(format!(
                "cross_entropy logits {:?} vs target {:?}",
                tl.shape(),
                target.shape()
            )));
        }
        let (rows, classes) = rows_cols(tl);
        if classes < 2 {
            return Err(Error::contract("cross_entropy needs at least two classes"));
        }
        for (i, row) in target.data().chunks(classes).enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-6 || row.iter().any(|&p| p < 0.0) {
                return Err(Error::contract(format!(
                    "cross_entropy target row {i} is not a distribution (sum {s})"
                )));
            }
        }
        let mut softmax = Vec::with_capacity(tl.numel());
        let mut total = 0.0;
        for (z, t) in tl.data().chunks(classes).zip(target.data().chunks(classes)) {
            let lse = log_sum_exp(z);
            for (zc, tc) in z.iter().zip(t) {
                if *tc != 0.0 {
                    total -= tc * (zc - lse);
                }
                softmax.push((zc - lse).exp());
            }
        }
        let needs = self.needs(logits);
        Ok(self.push(
            Tensor::scalar(total / rows as f64),
            Op::CrossEntropy {
                logits,
                target: target.data().to_vec(),
                softmax,
            },
            needs,
        ))
    }

    /// Reverse-mode sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let loss_node = &self.nodes[loss.0];
        if loss_node.value.numel() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                loss_node.value.shape()
            )));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match node.op {
                Op::Leaf if node.needs_grad => {
                    if grads[i].is_none() {
                        grads[i] = Some(vec![0.0; node.value.numel()]);
                    }
                }
                _ => grads[i] = None,
            }
        }
        Ok(Gradients { grads })
    }

    fn grad_slot<'g>(
        &self,
        grads: &'g mut [Option<Vec<f64>>],
        v: Var,
    ) -> Option<&'g mut Vec<f64>> {
        if !self.needs(v) {
            return None;
        }
        let len = self.nodes[v.0].value.numel();
        Some(grads[v.0].get_or_insert_with(|| vec![0.0; len]))
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k) = rows_cols(ta);
                let n = rows_cols(tb).1;
                if let Some(ga) = self.grad_slot(grads, *a) {
                    for i in 0..m {
                        let gi = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            ga[i * k + p] += dot(gi, &tb.data()[p * n..(p + 1) * n]);
                        }
                    }
                }
                if let Some(gb) = self.grad_slot(grads, *b) {
                    for i in 0..m {
                        let gi = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let av = ta.data()[i * k + p];
                            if av != 0.0 {
                                axpy(av, gi, &mut gb[p * n..(p + 1) * n]);
                            }
                        }
                    }
                }
            }
            Op::Add(a, b, mode) => {
                if let Some(ga) = self.grad_slot(grads, *a) {
                    axpy(1.0, g, ga);
                }
                if let Some(gb) = self.grad_slot(grads, *b) {
                    match mode {
                        Broadcast::Same => axpy(1.0, g, gb),
                        Broadcast::Scalar => gb[0] += g.iter().sum::<f64>(),
                        Broadcast::Row => {
                            let cols = gb.len();
                            for row in g.chunks(cols) {
                                axpy(1.0, row, gb);
                            }
                        }
                    }
                }
            }
            Op::Sub(a, b) => {
                if let Some(ga) = self.grad_slot(grads, *a) {
                    axpy(1.0, g, ga);
                }
                if let Some(gb) = self.grad_slot(grads, *b) {
                    axpy(-1.0, g, gb);
                }
            }
            Op::Mul(a, b) => {
                let bd = self.value(*b).data();
                if let Some(ga) = self.grad_slot(grads, *a) {
                    for ((o, gi), bi) in ga.iter_mut().zip(g).zip(bd) {
                        *o += gi * bi;
                    }
                }
                let ad = self.value(*a).data();
                if let Some(gb) = self.grad_slot(grads, *b) {
                    for ((o, gi), ai) in gb.iter_mut().zip(g).zip(ad) {
                        *o += gi * ai;
                    }
                }
            }
            Op::Affine(a, scale) => {
                if let Some(ga) = self.grad_slot(grads, *a) {
                    axpy(*scale, g, ga);
                }
            }
            Op::Sigmoid(a) => {
                let s = node.value.data();
                if let Some(ga) = self.grad_slot(grads, *a) {
                    for ((o, gi), si) in ga.iter_mut().zip(g).zip(s) {
                        *o += gi * si * (1.0 - si);
                    }
                }
            }
            Op::Relu(a) => {
                let x = self.value(*a).data();
                if let Some(ga) = self.grad_slot(grads, *a) {
                    for ((o, gi), xi) in ga.iter_mut().zip(g).zip(x) {
                        if *xi > 0.0 {
                            *o += gi;
                        }
                    }
                }
            }
            Op::Sum(a) => {
                if let Some(ga) = self.grad_slot(grads, *a) {
                    ga.iter_mut().for_each(|o| *o += g[0]);
                }
            }
            Op::Mean(a) => {
                if let Some(ga) = self.grad_slot(grads, *a) {
                    let s = g[0] / ga.len() as f64;
                    ga.iter_mut().for_each(|o| *o += s);
                }
            }
            Op::L1Mean(a) => {
                let x = self.value(*a).data();
                if let Some(ga) = self.grad_slot(grads, *a) {
                    let s = g[0] / ga.len() as f64;
                    for (o, xi) in ga.iter_mut().zip(x) {
                        if *xi > 0.0 {
                            *o += s;
                        } else if *xi < 0.0 {
                            *o -= s;
                        }
                    }
                }
            }
            Op::Conv1d(x, kernel) => {
                let (tx, tk) = (self.value(*x), self.value(*kernel));
                let (rows, t) = rows_cols(tx);
                let k = tk.numel();
                let t_out = t - k + 1;
                if let Some(gk) = self.grad_slot(grads, *kernel) {
                    for r in 0..rows {
                        let xr = &tx.data()[r * t..(r + 1) * t];
                        let gr = &g[r * t_out..(r + 1) * t_out];
                        for (j, o) in gk.iter_mut().enumerate() {
                            *o += dot(gr, &xr[j..j + t_out]);
                        }
                    }
                }
                if let Some(gx) = self.grad_slot(grads, *x) {
                    for r in 0..rows {
                        let gr = &g[r * t_out..(r + 1) * t_out];
                        let dst = &mut gx[r * t..(r + 1) * t];
                        for (j, &kj) in tk.data().iter().enumerate() {
                            axpy(kj, gr, &mut dst[j..j + t_out]);
                        }
                    }
                }
            }
            Op::RowMean(a) => {
                let (_, c) = rows_cols(self.value(*a));
                if let Some(ga) = self.grad_slot(grads, *a) {
                    for (row, gi) in ga.chunks_mut(c).zip(g) {
                        let s = gi / c as f64;
                        row.iter_mut().for_each(|o| *o += s);
                    }
                }
            }
            Op::Reshape(a) => {
                if let Some(ga) = self.grad_slot(grads, *a) {
                    axpy(1.0, g, ga);
                }
            }
            Op::ConcatCols(parts) => {
                let total = rows_cols(&node.value).1;
                let mut offset = 0;
                for p in parts {
                    let w = rows_cols(self.value(*p)).1;
                    if let Some(gp) = self.grad_slot(grads, *p) {
                        for (r, row) in gp.chunks_mut(w).enumerate() {
                            axpy(1.0, &g[r * total + offset..r * total + offset + w], row);
                        }
                    }
                    offset += w;
                }
            }
            Op::SliceCols { input, start } => {
                let c = rows_cols(self.value(*input)).1;
                let len = rows_cols(&node.value).1;
                if let Some(ga) = self.grad_slot(grads, *input) {
                    for (r, gr) in g.chunks(len).enumerate() {
                        axpy(1.0, gr, &mut ga[r * c + start..r * c + start + len]);
                    }
                }
            }
            Op::GatherCols { input, index } => {
                let c = rows_cols(self.value(*input)).1;
                let n = index.len();
                if let Some(ga) = self.grad_slot(grads, *input) {
                    for (r, gr) in g.chunks(n).enumerate() {
                        let dst = &mut ga[r * c..(r + 1) * c];
                        for (gi, &j) in gr.iter().zip(index.iter()) {
                            dst[j] += gi;
                        }
                    }
                }
            }
            Op::ComplexAbs(re, im) => {
                let out = node.value.data();
                for (v, part) in [(*re, self.value(*re)), (*im, self.value(*im))] {
                    if let Some(gv) = self.grad_slot(grads, v) {
                        for ((o, gi), (pi, ai)) in
                            gv.iter_mut().zip(g).zip(part.data().iter().zip(out))
                        {
                            if *ai > 0.0 {
                                *o += gi * pi / ai;
                            }
                        }
                    }
                }
            }
            Op::InverseDft { re, im, plan } => {
                // The adjoint of the real-part inverse transform is the
                // forward transform scaled by 1/T.
                let (g_re, g_im) = plan.forward(g, None);
                let scale = 1.0 / plan.len() as f64;
                if let Some(gr) = self.grad_slot(grads, *re) {
                    axpy(scale, &g_re, gr);
                }
                if let Some(gi) = self.grad_slot(grads, *im) {
                    axpy(scale, &g_im, gi);
                }
            }
            Op::CrossEntropy {
                logits,
                target,
                softmax,
            } => {
                let (rows, classes) = rows_cols(self.value(*logits));
                if let Some(gl) = self.grad_slot(grads, *logits) {
                    let s = g[0] / rows as f64;
                    for ((o, t), p) in gl
                        .chunks_mut(classes)
                        .zip(target.chunks(classes))
                        .zip(softmax.chunks(classes))
                    {
                        let mass: f64 = t.iter().sum();
                        for c in 0..classes {
                            o[c] += s * (mass * p[c] - t[c]);
                        }
                    }
                }
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}
