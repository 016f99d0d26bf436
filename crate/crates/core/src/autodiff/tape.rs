use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use super::Tensor;
use crate::{Error, Result};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a tensor recorded on a particular [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    idx: usize,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    AddRow(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Affine(usize, f64),
    Sigmoid(usize),
    Tanh(usize),
    SoftmaxRows(usize),
    LogSoftmaxRows(usize),
    ConcatRows(Vec<usize>),
    ConcatCols(Vec<usize>),
    SliceRows(usize, usize),
    SliceCols(usize, usize),
    Transpose(usize),
    SumAll(usize),
    MeanAll(usize),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only record of operations. Nodes are stored in creation order, so
/// inputs always precede outputs.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of a scalar loss with respect to every node of a tape.
#[derive(Debug, Clone)]
pub struct Gradients {
    tape: u64,
    shapes: Vec<[usize; 2]>,
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for `v`; tensors the loss does not depend on get zeros.
    pub fn get(&self, v: Var) -> Tensor {
        assert_eq!(v.tape, self.tape, "variable from a different tape");
        match &self.grads[v.idx] {
            Some(g) => g.clone(),
            None => {
                let [r, c] = self.shapes[v.idx];
                Tensor::zeros(r, c)
            }
        }
    }
}

fn shape_err(op: &str, a: [usize; 2], b: [usize; 2]) -> Error {
    Error::ShapeMismatch(format!("{op}: {}x{} vs {}x{}", a[0], a[1], b[0], b[1]))
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self.id,
            idx: self.nodes.len() - 1,
        }
    }

    fn idx(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.idx >= self.nodes.len() {
            return Err(Error::DetachedTensor);
        }
        Ok(v.idx)
    }

    fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    /// Trainable leaf.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Constant leaf; receives no gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        assert_eq!(v.tape, self.id, "variable from a different tape");
        &self.nodes[v.idx].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.idx].requires_grad
    }

    fn unary(&mut self, a: Var, value: Tensor, op: impl FnOnce(usize) -> Op) -> Result<Var> {
        let ia = self.idx(a)?;
        let rg = self.node(ia).requires_grad;
        Ok(self.push(value, op(ia), rg))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (va, vb) = (&self.node(ia).value, &self.node(ib).value);
        if va.cols() != vb.rows() {
            return Err(shape_err("matmul", va.shape(), vb.shape()));
        }
        let out = va.matmul(vb);
        let rg = self.node(ia).requires_grad || self.node(ib).requires_grad;
        Ok(self.push(out, Op::MatMul(ia, ib), rg))
    }

    fn binary_same(
        &mut self,
        name: &str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: fn(usize, usize) -> Op,
    ) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (va, vb) = (&self.node(ia).value, &self.node(ib).value);
        if va.shape() != vb.shape() {
            return Err(shape_err(name, va.shape(), vb.shape()));
        }
        let out = va.zip_map(vb, f);
        let rg = self.node(ia).requires_grad || self.node(ib).requires_grad;
        Ok(self.push(out, op(ia, ib), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same("sub", a, b, |x, y| x - y, Op::Sub)
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same("mul", a, b, |x, y| x * y, Op::Mul)
    }

    /// `a + bias`, with `bias` a `1 × cols` row broadcast over every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(bias)?);
        let (va, vb) = (&self.node(ia).value, &self.node(ib).value);
        if vb.rows() != 1 || vb.cols() != va.cols() {
            return Err(shape_err("add_row", va.shape(), vb.shape()));
        }
        let cols = va.cols();
        let data = va
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x + vb.data()[i % cols])
            .collect();
        let out = Tensor::from_parts(va.rows(), cols, data);
        let rg = self.node(ia).requires_grad || self.node(ib).requires_grad;
        Ok(self.push(out, Op::AddRow(ia, ib), rg))
    }

    /// `scale * a + shift`, elementwise.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Result<Var> {
        let out = self.value_checked(a)?.map(|x| scale * x + shift);
        self.unary(a, out, |i| Op::Affine(i, scale))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.affine(a, s, 0.0)
    }

    fn value_checked(&self, a: Var) -> Result<&Tensor> {
        Ok(&self.node(self.idx(a)?).value)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value_checked(a)?.map(sigmoid);
        self.unary(a, out, Op::Sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.value_checked(a)?.map(libm::tanh);
        self.unary(a, out, Op::Tanh)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let out = softmax_rows(self.value_checked(a)?);
        self.unary(a, out, Op::SoftmaxRows)
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Result<Var> {
        let v = self.value_checked(a)?;
        let cols = v.cols();
        let mut data = Vec::with_capacity(v.len());
        for r in 0..v.rows() {
            let row = v.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = libm::log(row.iter().map(|&x| libm::exp(x - max)).sum::<f64>());
            data.extend(row.iter().map(|&x| x - max - lse));
        }
        let out = Tensor::from_parts(v.rows(), cols, data);
        self.unary(a, out, Op::LogSoftmaxRows)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::ShapeMismatch("concat_rows of nothing".into()));
        }
        let ids = parts
            .iter()
            .map(|&p| self.idx(p))
            .collect::<Result<Vec<_>>>()?;
        let cols = self.node(ids[0]).value.cols();
        let mut data = Vec::new();
        let mut rows = 0;
        let mut rg = false;
        for &i in &ids {
            let v = &self.node(i).value;
            if v.cols() != cols {
                return Err(shape_err(
                    "concat_rows",
                    self.node(ids[0]).value.shape(),
                    v.shape(),
                ));
            }
            data.extend_from_slice(v.data());
            rows += v.rows();
            rg |= self.node(i).requires_grad;
        }
        Ok(self.push(
            Tensor::from_parts(rows, cols, data),
            Op::ConcatRows(ids),
            rg,
        ))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::ShapeMismatch("concat_cols of nothing".into()));
        }
        let ids = parts
            .iter()
            .map(|&p| self.idx(p))
            .collect::<Result<Vec<_>>>()?;
        let rows = self.node(ids[0]).value.rows();
        let mut cols = 0;
        let mut rg = false;
        for &i in &ids {
            let v = &self.node(i).value;
            if v.rows() != rows {
                return Err(shape_err(
                    "concat_cols",
                    self.node(ids[0]).value.shape(),
                    v.shape(),
                ));
            }
            cols += v.cols();
            rg |= self.node(i).requires_grad;
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &i in &ids {
                data.extend_from_slice(self.node(i).value.row(r));
            }
        }
        Ok(self.push(
            Tensor::from_parts(rows, cols, data),
            Op::ConcatCols(ids),
            rg,
        ))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let v = self.value_checked(a)?;
        if start >= end || end > v.rows() {
            return Err(Error::ShapeMismatch(format!(
                "slice_rows {start}..{end} of {}",
                v.rows()
            )));
        }
        let out = Tensor::from_parts(
            end - start,
            v.cols(),
            v.data()[start * v.cols()..end * v.cols()].to_vec(),
        );
        self.unary(a, out, |i| Op::SliceRows(i, start))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let v = self.value_checked(a)?;
        if start >= end || end > v.cols() {
            return Err(Error::ShapeMismatch(format!(
                "slice_cols {start}..{end} of {}",
                v.cols()
            )));
        }
        let mut data = Vec::with_capacity(v.rows() * (end - start));
        for r in 0..v.rows() {
            data.extend_from_slice(&v.row(r)[start..end]);
        }
        let out = Tensor::from_parts(v.rows(), end - start, data);
        self.unary(a, out, |i| Op::SliceCols(i, start))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value_checked(a)?.transpose();
        self.unary(a, out, Op::Transpose)
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value_checked(a)?.sum());
        self.unary(a, out, Op::SumAll)
    }

    pub fn mean_all(&mut self, a: Var) -> Result<Var> {
        let v = self.value_checked(a)?;
        let out = Tensor::scalar(v.sum() / v.len() as f64);
        self.unary(a, out, Op::MeanAll)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let li = self.idx(loss)?;
        if !self.node(li).value.is_scalar() {
            return Err(Error::NotScalarLoss);
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[li] = Some(Tensor::scalar(1.0));
        for i in (0..=li).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.requires_grad {
                self.propagate(i, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        Ok(Gradients {
            tape: self.id,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
            grads,
        })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], i: usize, g: Tensor) {
        if !self.nodes[i].requires_grad {
            return;
        }
        match &mut grads[i] {
            Some(acc) => acc.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let y = &self.nodes[i].value;
        let val = |j: usize| &self.nodes[j].value;
        match &self.nodes[i].op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                if self.nodes[a].requires_grad {
                    self.accumulate(grads, a, g.matmul_bt(val(b)));
                }
                if self.nodes[b].requires_grad {
                    self.accumulate(grads, b, val(a).matmul_at(g));
                }
            }
            &Op::Add(a, b) => {
                self.accumulate(grads, a, g.clone());
                self.accumulate(grads, b, g.clone());
            }
            &Op::Sub(a, b) => {
                self.accumulate(grads, a, g.clone());
                self.accumulate(grads, b, g.map(|x| -x));
            }
            &Op::Mul(a, b) => {
                self.accumulate(grads, a, g.zip_map(val(b), |x, y| x * y));
                self.accumulate(grads, b, g.zip_map(val(a), |x, y| x * y));
            }
            &Op::AddRow(a, b) => {
                self.accumulate(grads, a, g.clone());
                let cols = g.cols();
                let mut gb = vec![0.0; cols];
                for r in 0..g.rows() {
                    for (acc, v) in gb.iter_mut().zip(g.row(r)) {
                        *acc += v;
                    }
                }
                self.accumulate(grads, b, Tensor::from_parts(1, cols, gb));
            }
            &Op::Affine(a, scale) => self.accumulate(grads, a, g.map(|x| scale * x)),
            &Op::Sigmoid(a) => self.accumulate(grads, a, g.zip_map(y, |gx, s| gx * s * (1.0 - s))),
            &Op::Tanh(a) => self.accumulate(grads, a, g.zip_map(y, |gx, t| gx * (1.0 - t * t))),
            &Op::SoftmaxRows(a) => {
                let mut out = Vec::with_capacity(g.len());
                for r in 0..g.rows() {
                    let (gr, yr) = (g.row(r), y.row(r));
                    let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                    out.extend(gr.iter().zip(yr).map(|(gx, yx)| yx * (gx - dot)));
                }
                self.accumulate(grads, a, Tensor::from_parts(g.rows(), g.cols(), out));
            }
            &Op::LogSoftmaxRows(a) => {
                let mut out = Vec::with_capacity(g.len());
                for r in 0..g.rows() {
                    let (gr, yr) = (g.row(r), y.row(r));
                    let total: f64 = gr.iter().sum();
                    out.extend(
                        gr.iter()
                            .zip(yr)
                            .map(|(gx, ly)| gx - libm::exp(*ly) * total),
                    );
                }
                self.accumulate(grads, a, Tensor::from_parts(g.rows(), g.cols(), out));
            }
            Op::ConcatRows(ids) => {
                let cols = g.cols();
                let mut start = 0;
                for &j in ids {
                    let rows = val(j).rows();
                    let part = g.data()[start * cols..(start + rows) * cols].to_vec();
                    self.accumulate(grads, j, Tensor::from_parts(rows, cols, part));
                    start += rows;
                }
            }
            Op::ConcatCols(ids) => {
                let mut start = 0;
                for &j in ids {
                    let cols = val(j).cols();
                    let mut part = Vec::with_capacity(g.rows() * cols);
                    for r in 0..g.rows() {
                        part.extend_from_slice(&g.row(r)[start..start + cols]);
                    }
                    self.accumulate(grads, j, Tensor::from_parts(g.rows(), cols, part));
                    start += cols;
                }
            }
            &Op::SliceRows(a, start) => {
                let src = val(a);
                let mut full = Tensor::zeros(src.rows(), src.cols());
                let cols = src.cols();
                full.data_mut()[start * cols..start * cols + g.len()].copy_from_slice(g.data());
                self.accumulate(grads, a, full);
            }
            &Op::SliceCols(a, start) => {
                let src = val(a);
                let mut full = Tensor::zeros(src.rows(), src.cols());
                let cols = src.cols();
                for r in 0..g.rows() {
                    full.data_mut()[r * cols + start..r * cols + start + g.cols()]
                        .copy_from_slice(g.row(r));
                }
                self.accumulate(grads, a, full);
            }
            &Op::Transpose(a) => self.accumulate(grads, a, g.transpose()),
            &Op::SumAll(a) => {
                let src = val(a);
                self.accumulate(
                    grads,
                    a,
                    Tensor::filled(src.rows(), src.cols(), g.data()[0]),
                );
            }
            &Op::MeanAll(a) => {
                let src = val(a);
                let v = g.data()[0] / src.len() as f64;
                self.accumulate(grads, a, Tensor::filled(src.rows(), src.cols(), v));
            }
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Row-wise softmax with max subtraction.
pub(crate) fn softmax_rows(v: &Tensor) -> Tensor {
    let mut data = Vec::with_capacity(v.len());
    for r in 0..v.rows() {
        let row = v.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|&x| libm::exp(x - max)).collect();
        let total: f64 = exps.iter().sum();
        data.extend(exps.iter().map(|e| e / total));
    }
    Tensor::from_parts(v.rows(), v.cols(), data)
}
