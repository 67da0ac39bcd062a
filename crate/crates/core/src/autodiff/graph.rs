use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::array::{matmul_at_acc, matmul_bt_acc, matmul_into};
use super::{Array, Gradients, ParamId, ParameterStore};
use crate::error::{dim_err, Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Stack vertically; column counts must agree.
    Rows,
    /// Join horizontally; row counts must agree.
    Cols,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Binary {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Unary {
    Tanh,
    Sigmoid,
    Log,
    Scale(f64),
    AddScalar(f64),
    ClampMin(f64),
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    Binary(Binary, Var, Var),
    Unary(Unary, Var),
    Softmax(Var),
    Concat(Vec<Var>, Axis),
    SliceCols(Var, usize),
    RepeatRows(Var),
    ScaleRows(Var, Var),
    SumRows(Var),
    Sum(Var),
    Pick(Var, usize),
    Normalize { x: Var, denom: f64, floored: bool },
    Gather(Var, Vec<usize>),
    Transpose(Var),
}

struct Node {
    op: Op,
    /// `None` for parameters, whose values live in the store.
    value: Option<Array>,
    requires_grad: bool,
    /// Accumulated gradient of input leaves; lazily allocated.
    grad: Option<Array>,
}

/// Outcome of a sum-normalization with a floored denominator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalized {
    pub var: Var,
    pub sum: f64,
    pub floored: bool,
}

/// Tape of operations recorded during a forward pass.
///
/// Nodes are appended in evaluation order, so the tape order is a topological
/// order and backward is a single reverse sweep. Parameters are read from the
/// borrowed [`ParameterStore`] and their gradients are accumulated into a
/// caller-provided [`Gradients`].
pub struct Graph<'p> {
    store: Option<&'p ParameterStore>,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<Var>>,
}

impl Default for Graph<'static> {
    fn default() -> Self {
        Graph::new()
    }
}

impl Graph<'static> {
    pub fn new() -> Self {
        Graph { store: None, nodes: Vec::new(), param_nodes: Vec::new() }
    }
}

fn check(op: &'static str, a: Array) -> Result<Array> {
    match a.first_non_finite() {
        None => Ok(a),
        Some(_) => Err(Error::NonFinite { op }),
    }
}

/// Flat index into an operand that may be row- or scalar-broadcast to `(r, c)`.
#[inline]
fn bidx(shape: (usize, usize), r: usize, c: usize) -> usize {
    match shape {
        (1, 1) => 0,
        (1, cols) => {
            debug_assert!(c < cols);
            c
        }
        (_, cols) => r * cols + c,
    }
}

fn broadcast_shape(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Result<(usize, usize)> {
    if a == b {
        return Ok(a);
    }
    let fits = |small: (usize, usize), big: (usize, usize)| small == (1, 1) || (small.0 == 1 && small.1 == big.1);
    if fits(b, a) {
        Ok(a)
    } else if fits(a, b) {
        Ok(b)
    } else {
        Err(dim_err(op, format!("cannot broadcast {}x{} with {}x{}", a.0, a.1, b.0, b.1)))
    }
}

impl<'p> Graph<'p> {
    pub fn with_params(store: &'p ParameterStore) -> Self {
        Graph { store: Some(store), nodes: Vec::new(), param_nodes: vec![None; store.len()] }
    }

    pub fn store(&self) -> Option<&'p ParameterStore> {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Array, requires_grad: bool) -> Var {
        self.nodes.push(Node { op, value: Some(value), requires_grad, grad: None });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A differentiable leaf.
    pub fn input(&mut self, value: Array) -> Var {
        self.push(Op::Input, value, true)
    }

    /// A leaf excluded from differentiation.
    pub fn constant(&mut self, value: Array) -> Var {
        self.push(Op::Input, value, false)
    }

    /// Node for a stored parameter. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        self.nodes.push(Node { op: Op::Param(id), value: None, requires_grad: true, grad: None });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(v);
        v
    }

    pub fn value(&self, v: Var) -> &Array {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(a), _) => a,
            (None, Op::Param(id)) => self.store.expect("parameter node without store").value(*id),
            (None, _) => unreachable!("only parameter nodes borrow their value"),
        }
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).data()[0]
    }

    /// Accumulated gradient of an input leaf after [`Graph::backward`].
    pub fn grad(&self, v: Var) -> Option<&Array> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).shape();
        let (k2, n) = self.value(b).shape();
        if k != k2 {
            return Err(dim_err("matmul", format!("{m}x{k} · {k2}x{n}")));
        }
        let mut out = vec![0.0; m * n];
        matmul_into(self.value(a).data(), self.value(b).data(), m, k, n, &mut out);
        let out = check("matmul", Array::new(m, n, out)?)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::MatMul(a, b), out, rg))
    }

    fn binary(&mut self, kind: Binary, a: Var, b: Var) -> Result<Var> {
        let name = match kind {
            Binary::Add => "add",
            Binary::Sub => "sub",
            Binary::Mul => "mul",
        };
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        let (rows, cols) = broadcast_shape(name, sa, sb)?;
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let (x, y) = (da[bidx(sa, r, c)], db[bidx(sb, r, c)]);
                out.push(match kind {
                    Binary::Add => x + y,
                    Binary::Sub => x - y,
                    Binary::Mul => x * y,
                });
            }
        }
        let out = check(name, Array::new(rows, cols, out)?)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Binary(kind, a, b), out, rg))
    }

    /// Elementwise sum; `b` (or `a`) may be a `1 × d` row or a scalar.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, a, b)
    }

    /// Elementwise (Hadamard) product with row/scalar broadcasting.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, a, b)
    }

    fn unary(&mut self, kind: Unary, a: Var) -> Result<Var> {
        let x = self.value(a);
        let (rows, cols) = x.shape();
        let (name, out): (&'static str, Vec<f64>) = match kind {
            Unary::Tanh => ("tanh", x.data().iter().map(|&v| libm::tanh(v)).collect()),
            Unary::Sigmoid => ("sigmoid", x.data().iter().map(|&v| sigmoid(v)).collect()),
            Unary::Log => {
                if let Some(index) = x.data().iter().position(|&v| v <= 0.0 || v.is_nan()) {
                    return Err(Error::Domain { op: "log", index });
                }
                ("log", x.data().iter().map(|&v| libm::log(v)).collect())
            }
            Unary::Scale(k) => ("scale", x.data().iter().map(|&v| v * k).collect()),
            Unary::AddScalar(k) => ("add_scalar", x.data().iter().map(|&v| v + k).collect()),
            Unary::ClampMin(lo) => ("clamp_min", x.data().iter().map(|&v| v.max(lo)).collect()),
        };
        let out = check(name, Array::new(rows, cols, out)?)?;
        let rg = self.rg(a);
        Ok(self.push(Op::Unary(kind, a), out, rg))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Tanh, a)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Sigmoid, a)
    }

    /// Natural log; any non-positive entry is a domain error naming its index.
    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Log, a)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var> {
        self.unary(Unary::Scale(k), a)
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Result<Var> {
        self.unary(Unary::AddScalar(k), a)
    }

    /// `max(x, lo)`; the gradient is zero where the clamp is active.
    pub fn clamp_min(&mut self, a: Var, lo: f64) -> Result<Var> {
        self.unary(Unary::ClampMin(lo), a)
    }

    /// Softmax over all entries of a vector, computed with max subtraction.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if !x.is_vector() {
            return Err(dim_err("softmax", format!("expected a vector, got {}x{}", x.rows(), x.cols())));
        }
        if x.first_non_finite().is_some() {
            return Err(Error::NonFinite { op: "softmax" });
        }
        let (rows, cols) = x.shape();
        let out = softmax_slice(x.data());
        let out = check("softmax", Array::new(rows, cols, out)?)?;
        let rg = self.rg(a);
        Ok(self.push(Op::Softmax(a), out, rg))
    }

    pub fn concat(&mut self, parts: &[Var], axis: Axis) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(dim_err("concat", "no parts".into()));
        };
        let (r0, c0) = self.value(first).shape();
        let out = match axis {
            Axis::Cols => {
                if let Some(p) = parts.iter().find(|p| self.value(**p).rows() != r0) {
                    return Err(dim_err("concat", format!("row count {} != {r0}", self.value(*p).rows())));
                }
                let cols: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
                let mut data = Vec::with_capacity(r0 * cols);
                for r in 0..r0 {
                    for p in parts {
                        data.extend_from_slice(self.value(*p).row_slice(r));
                    }
                }
                Array::new(r0, cols, data)?
            }
            Axis::Rows => {
                if let Some(p) = parts.iter().find(|p| self.value(**p).cols() != c0) {
                    return Err(dim_err("concat", format!("column count {} != {c0}", self.value(*p).cols())));
                }
                let rows: usize = parts.iter().map(|p| self.value(*p).rows()).sum();
                let mut data = Vec::with_capacity(rows * c0);
                for p in parts {
                    data.extend_from_slice(self.value(*p).data());
                }
                Array::new(rows, c0, data)?
            }
        };
        let rg = parts.iter().any(|p| self.rg(*p));
        Ok(self.push(Op::Concat(parts.to_vec(), axis), out, rg))
    }

    /// Columns `start .. start + len`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let x = self.value(a);
        let (rows, cols) = x.shape();
        if len == 0 || start + len > cols {
            return Err(dim_err("slice_cols", format!("{start}+{len} out of {cols} columns")));
        }
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&x.row_slice(r)[start..start + len]);
        }
        let out = Array::new(rows, len, data)?;
        let rg = self.rg(a);
        Ok(self.push(Op::SliceCols(a, start), out, rg))
    }

    /// Tiles a `1 × d` row `m` times.
    pub fn repeat_rows(&mut self, a: Var, m: usize) -> Result<Var> {
        let x = self.value(a);
        if x.rows() != 1 || m == 0 {
            return Err(dim_err("repeat_rows", format!("expected a row, got {}x{}", x.rows(), x.cols())));
        }
        let cols = x.cols();
        let data = x.data().repeat(m);
        let out = Array::new(m, cols, data)?;
        let rg = self.rg(a);
        Ok(self.push(Op::RepeatRows(a), out, rg))
    }

    /// Row `i` of `x` multiplied by `w[i]`; `w` is any vector of length `rows(x)`.
    pub fn scale_rows(&mut self, x: Var, w: Var) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(w));
        let (rows, cols) = xv.shape();
        if !wv.is_vector() || wv.len() != rows {
            return Err(dim_err("scale_rows", format!("{} weights for {rows} rows", wv.len())));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let k = wv.data()[r];
            data.extend(xv.row_slice(r).iter().map(|v| v * k));
        }
        let out = check("scale_rows", Array::new(rows, cols, data)?)?;
        let rg = self.rg(x) || self.rg(w);
        Ok(self.push(Op::ScaleRows(x, w), out, rg))
    }

    /// Column sums as a `1 × d` row.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let (rows, cols) = x.shape();
        let mut data = vec![0.0; cols];
        for r in 0..rows {
            for (o, v) in data.iter_mut().zip(x.row_slice(r)) {
                *o += v;
            }
        }
        let out = check("sum_rows", Array::row(data))?;
        let rg = self.rg(a);
        Ok(self.push(Op::SumRows(a), out, rg))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        let out = check("sum", Array::scalar(s))?;
        let rg = self.rg(a);
        Ok(self.push(Op::Sum(a), out, rg))
    }

    /// Entry at flat index `index`, as a scalar.
    pub fn pick(&mut self, a: Var, index: usize) -> Result<Var> {
        let x = self.value(a);
        if index >= x.len() {
            return Err(dim_err("pick", format!("index {index} out of {}", x.len())));
        }
        let out = Array::scalar(x.data()[index]);
        let rg = self.rg(a);
        Ok(self.push(Op::Pick(a, index), out, rg))
    }

    /// `x / max(sum(x), floor)`. The returned flag reports whether the floor was hit.
    pub fn normalize(&mut self, a: Var, floor: f64) -> Result<Normalized> {
        let x = self.value(a);
        let sum: f64 = x.data().iter().sum();
        let floored = !(sum >= floor);
        let denom = if floored { floor } else { sum };
        let (rows, cols) = x.shape();
        let data = x.data().iter().map(|v| v / denom).collect();
        let out = check("normalize", Array::new(rows, cols, data)?)?;
        let rg = self.rg(a);
        let var = self.push(Op::Normalize { x: a, denom, floored }, out, rg);
        Ok(Normalized { var, sum, floored })
    }

    /// Rows `ids` of `table`, stacked (embedding lookup).
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let t = self.value(table);
        let (rows, cols) = t.shape();
        if ids.is_empty() {
            return Err(dim_err("gather", "no ids".into()));
        }
        if let Some(bad) = ids.iter().find(|&&i| i >= rows) {
            return Err(dim_err("gather", format!("row {bad} out of {rows}")));
        }
        let mut data = Vec::with_capacity(ids.len() * cols);
        for &i in ids {
            data.extend_from_slice(t.row_slice(i));
        }
        let out = Array::new(ids.len(), cols, data)?;
        let rg = self.rg(table);
        Ok(self.push(Op::Gather(table, ids.to_vec()), out, rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let (rows, cols) = x.shape();
        let mut data = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                data[c * rows + r] = x.get(r, c);
            }
        }
        let out = Array::new(cols, rows, data)?;
        let rg = self.rg(a);
        Ok(self.push(Op::Transpose(a), out, rg))
    }

    /// Reverse sweep from a scalar `loss`. Parameter gradients are added to
    /// `grads`; input-leaf gradients accumulate on the graph. Calling this
    /// twice without resetting accumulates twice.
    pub fn backward(&mut self, loss: Var, grads: &mut Gradients) -> Result<()> {
        self.backprop(loss, Some(grads))
    }

    /// Backward for graphs without parameters (or when only input gradients are wanted).
    pub fn backward_inputs(&mut self, loss: Var) -> Result<()> {
        self.backprop(loss, None)
    }

    fn backprop(&mut self, loss: Var, mut grads: Option<&mut Gradients>) -> Result<()> {
        if self.value(loss).shape() != (1, 1) {
            let (r, c) = self.value(loss).shape();
            return Err(Error::Contract(format!("backward needs a scalar loss, got {r}x{c}")));
        }
        let mut adj: Vec<Option<Array>> = Vec::new();
        adj.resize_with(loss.0 + 1, || None);
        adj[loss.0] = Some(Array::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            let op = self.nodes[i].op.clone();
            match op {
                Op::Input => match &mut self.nodes[i].grad {
                    Some(acc) => acc.add_assign(&g),
                    slot => *slot = Some(g),
                },
                Op::Param(id) => {
                    if let Some(grads) = grads.as_deref_mut() {
                        grads.get_mut(id).add_assign(&g);
                    }
                }
                Op::MatMul(a, b) => {
                    let (m, k) = self.value(a).shape();
                    let n = self.value(b).cols();
                    if self.rg(a) {
                        let buf = slot(&mut adj, a, (m, k));
                        matmul_bt_acc(g.data(), self.value(b).data(), m, k, n, buf.data_mut());
                    }
                    if self.rg(b) {
                        let buf = slot(&mut adj, b, (k, n));
                        matmul_at_acc(self.value(a).data(), g.data(), m, k, n, buf.data_mut());
                    }
                }
                Op::Binary(kind, a, b) => {
                    let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
                    let (rows, cols) = g.shape();
                    if self.rg(a) {
                        let other = self.value(b).data();
                        let mut local = Array::zeros(sa.0, sa.1);
                        let ld = local.data_mut();
                        for r in 0..rows {
                            for c in 0..cols {
                                let gv = g.data()[r * cols + c];
                                ld[bidx(sa, r, c)] += match kind {
                                    Binary::Add | Binary::Sub => gv,
                                    Binary::Mul => gv * other[bidx(sb, r, c)],
                                };
                            }
                        }
                        slot(&mut adj, a, sa).add_assign(&local);
                    }
                    if self.rg(b) {
                        let other = self.value(a).data();
                        let mut local = Array::zeros(sb.0, sb.1);
                        let ld = local.data_mut();
                        for r in 0..rows {
                            for c in 0..cols {
                                let gv = g.data()[r * cols + c];
                                ld[bidx(sb, r, c)] += match kind {
                                    Binary::Add => gv,
                                    Binary::Sub => -gv,
                                    Binary::Mul => gv * other[bidx(sa, r, c)],
                                };
                            }
                        }
                        slot(&mut adj, b, sb).add_assign(&local);
                    }
                }
                Op::Unary(kind, a) => {
                    let shape = self.value(a).shape();
                    let x = self.value(a).data();
                    let y = self.nodes[i].value.as_ref().expect("op value").data();
                    let local: Vec<f64> = match kind {
                        Unary::Tanh => g.data().iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect(),
                        Unary::Sigmoid => g.data().iter().zip(y).map(|(g, y)| g * y * (1.0 - y)).collect(),
                        Unary::Log => g.data().iter().zip(x).map(|(g, x)| g / x).collect(),
                        Unary::Scale(k) => g.data().iter().map(|g| g * k).collect(),
                        Unary::AddScalar(_) => g.data().to_vec(),
                        Unary::ClampMin(lo) => g
                            .data()
                            .iter()
                            .zip(x)
                            .map(|(g, x)| if *x >= lo { *g } else { 0.0 })
                            .collect(),
                    };
                    slot(&mut adj, a, shape).add_assign_slice(&local);
                }
                Op::Softmax(a) => {
                    let shape = self.value(a).shape();
                    let y = self.nodes[i].value.as_ref().expect("op value").data();
                    let dot: f64 = g.data().iter().zip(y).map(|(g, y)| g * y).sum();
                    let local: Vec<f64> = g.data().iter().zip(y).map(|(g, y)| y * (g - dot)).collect();
                    slot(&mut adj, a, shape).add_assign_slice(&local);
                }
                Op::Concat(parts, axis) => {
                    let (rows, cols) = g.shape();
                    let mut offset = 0;
                    for p in parts {
                        let shape = self.value(p).shape();
                        if self.rg(p) {
                            let buf = slot(&mut adj, p, shape);
                            match axis {
                                Axis::Cols => {
                                    for r in 0..rows {
                                        let src = &g.data()[r * cols + offset..r * cols + offset + shape.1];
                                        for (o, s) in buf.data_mut()[r * shape.1..(r + 1) * shape.1].iter_mut().zip(src) {
                                            *o += s;
                                        }
                                    }
                                }
                                Axis::Rows => {
                                    let src = &g.data()[offset * cols..(offset + shape.0) * cols];
                                    buf.add_assign_slice(src);
                                }
                            }
                        }
                        offset += match axis {
                            Axis::Cols => shape.1,
                            Axis::Rows => shape.0,
                        };
                    }
                }
                Op::SliceCols(a, start) => {
                    let shape = self.value(a).shape();
                    let (rows, len) = g.shape();
                    let buf = slot(&mut adj, a, shape);
                    for r in 0..rows {
                        for c in 0..len {
                            buf.data_mut()[r * shape.1 + start + c] += g.data()[r * len + c];
                        }
                    }
                }
                Op::RepeatRows(a) => {
                    let shape = self.value(a).shape();
                    let buf = slot(&mut adj, a, shape);
                    for r in 0..g.rows() {
                        buf.add_assign_slice(g.row_slice(r));
                    }
                }
                Op::ScaleRows(x, w) => {
                    let (rows, cols) = g.shape();
                    if self.rg(x) {
                        let wv = self.value(w).data();
                        let mut local = Vec::with_capacity(rows * cols);
                        for r in 0..rows {
                            local.extend(g.row_slice(r).iter().map(|gv| gv * wv[r]));
                        }
                        slot(&mut adj, x, (rows, cols)).add_assign_slice(&local);
                    }
                    if self.rg(w) {
                        let xv = self.value(x);
                        let local: Vec<f64> = (0..rows)
                            .map(|r| g.row_slice(r).iter().zip(xv.row_slice(r)).map(|(a, b)| a * b).sum())
                            .collect();
                        let shape = self.value(w).shape();
                        slot(&mut adj, w, shape).add_assign_slice(&local);
                    }
                }
                Op::SumRows(a) => {
                    let shape = self.value(a).shape();
                    let buf = slot(&mut adj, a, shape);
                    for r in 0..shape.0 {
                        for (o, gv) in buf.data_mut()[r * shape.1..(r + 1) * shape.1].iter_mut().zip(g.data()) {
                            *o += gv;
                        }
                    }
                }
                Op::Sum(a) => {
                    let shape = self.value(a).shape();
                    let gv = g.data()[0];
                    slot(&mut adj, a, shape).data_mut().iter_mut().for_each(|o| *o += gv);
                }
                Op::Pick(a, index) => {
                    let shape = self.value(a).shape();
                    slot(&mut adj, a, shape).data_mut()[index] += g.data()[0];
                }
                Op::Normalize { x, denom, floored } => {
                    let shape = self.value(x).shape();
                    let local: Vec<f64> = if floored {
                        g.data().iter().map(|gv| gv / denom).collect()
                    } else {
                        let y = self.nodes[i].value.as_ref().expect("op value").data();
                        let dot: f64 = g.data().iter().zip(y).map(|(g, y)| g * y).sum();
                        g.data().iter().map(|gv| (gv - dot) / denom).collect()
                    };
                    slot(&mut adj, x, shape).add_assign_slice(&local);
                }
                Op::Gather(table, ids) => {
                    let shape = self.value(table).shape();
                    let buf = slot(&mut adj, table, shape);
                    for (k, &row) in ids.iter().enumerate() {
                        let src = g.row_slice(k);
                        for (o, s) in buf.data_mut()[row * shape.1..(row + 1) * shape.1].iter_mut().zip(src) {
                            *o += s;
                        }
                    }
                }
                Op::Transpose(a) => {
                    let shape = self.value(a).shape();
                    let (rows, cols) = g.shape();
                    let buf = slot(&mut adj, a, shape);
                    for r in 0..rows {
                        for c in 0..cols {
                            buf.data_mut()[c * rows + r] += g.data()[r * cols + c];
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn slot(adj: &mut [Option<Array>], v: Var, shape: (usize, usize)) -> &mut Array {
    adj[v.0].get_or_insert_with(|| Array::zeros(shape.0, shape.1))
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Max-subtracted softmax of a slice.
pub fn softmax_slice(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| libm::exp(v - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
