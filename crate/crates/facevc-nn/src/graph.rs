//! Reverse-mode tape over 2-D values.
//!
//! Every node is a rows x cols matrix (vectors are a single row). Values are
//! held in f64 while the tape is alive; parameters enter via
//! [`Graph::param`] and their gradients flow back into the owning
//! [`ParameterRegistry`](crate::registry::ParameterRegistry) as f32 after
//! [`Graph::backward`]. A graph is built fresh for each forward pass and
//! dropped afterwards.

use std::collections::HashMap;

use crate::error::{NnError, Result};
use crate::registry::ParameterRegistry;
use crate::tensor::Tensor;

pub type ValueId = usize;

#[derive(Debug, Clone)]
enum Op {
    Leaf { param: Option<String> },
    MatMul { a: ValueId, b: ValueId },
    Add { a: ValueId, b: ValueId },
    Sub { a: ValueId, b: ValueId },
    Mul { a: ValueId, b: ValueId },
    Div { a: ValueId, b: ValueId },
    Scale { a: ValueId, c: f64 },
    AddScalar { a: ValueId },
    Transpose { a: ValueId },
    Relu { a: ValueId },
    Tanh { a: ValueId },
    Exp { a: ValueId },
    Sqrt { a: ValueId },
    Clamp { a: ValueId, lo: f64, hi: f64 },
    SoftmaxRows { a: ValueId },
    LogSoftmaxRows { a: ValueId },
    SumAll { a: ValueId },
    RowSums { a: ValueId },
    ColSums { a: ValueId },
    ConcatRows { parts: Vec<ValueId> },
    ConcatCols { parts: Vec<ValueId> },
    SliceRows { a: ValueId, start: usize },
    SliceCols { a: ValueId, start: usize },
    GatherRows { a: ValueId, idx: Vec<usize> },
    BroadcastRows { a: ValueId },
    Detach,
}

struct Node {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
    out
}

/// How the rhs of an elementwise op lines up against the lhs.
#[derive(Clone, Copy, PartialEq)]
enum Broadcast {
    Same,
    Row,    // rhs is [1 x n]
    Col,    // rhs is [m x 1]
    Scalar, // rhs is [1 x 1]
}

impl Broadcast {
    fn resolve(op: &'static str, lm: usize, ln: usize, rm: usize, rn: usize) -> Result<Self> {
        if rm == lm && rn == ln {
            Ok(Broadcast::Same)
        } else if rm == 1 && rn == 1 {
            Ok(Broadcast::Scalar)
        } else if rm == 1 && rn == ln {
            Ok(Broadcast::Row)
        } else if rm == lm && rn == 1 {
            Ok(Broadcast::Col)
        } else {
            Err(NnError::DimensionMismatch {
                op,
                lhs: vec![lm, ln],
                rhs: vec![rm, rn],
            })
        }
    }

    fn rhs_index(self, i: usize, j: usize, rn: usize) -> usize {
        match self {
            Broadcast::Same => i * rn + j,
            Broadcast::Row => j,
            Broadcast::Col => i,
            Broadcast::Scalar => 0,
        }
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, rows: usize, cols: usize, data: Vec<f64>, op: Op) -> ValueId {
        debug_assert_eq!(rows * cols, data.len());
        self.nodes.push(Node {
            rows,
            cols,
            data,
            op,
        });
        self.grads.push(None);
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, id: ValueId) -> (usize, usize) {
        (self.nodes[id].rows, self.nodes[id].cols)
    }

    pub fn value(&self, id: ValueId) -> &[f64] {
        &self.nodes[id].data
    }

    pub fn value_f32(&self, id: ValueId) -> Vec<f32> {
        self.nodes[id].data.iter().map(|&v| v as f32).collect()
    }

    /// Extracts the stored value as an f32 tensor (single rows flatten to rank 1).
    pub fn value_tensor(&self, id: ValueId) -> Tensor {
        let (r, c) = self.shape(id);
        let shape = if r == 1 { vec![c] } else { vec![r, c] };
        Tensor::new(shape, self.value_f32(id)).expect("graph value shape is consistent")
    }

    pub fn scalar_value(&self, id: ValueId) -> Result<f64> {
        let n = &self.nodes[id];
        if n.rows * n.cols != 1 {
            return Err(NnError::Validation(format!(
                "expected a scalar node, got {}x{}",
                n.rows, n.cols
            )));
        }
        Ok(n.data[0])
    }

    pub fn grad(&self, id: ValueId) -> Option<&[f64]> {
        self.grads[id].as_deref()
    }

    // ── leaves ──────────────────────────────────────────────────────

    pub fn constant(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> Result<ValueId> {
        if rows * cols != data.len() || rows == 0 || cols == 0 {
            return Err(NnError::Validation(format!(
                "constant: {rows}x{cols} does not match {} elements",
                data.len()
            )));
        }
        Ok(self.push(rows, cols, data, Op::Leaf { param: None }))
    }

    pub fn scalar(&mut self, v: f64) -> ValueId {
        self.push(1, 1, vec![v], Op::Leaf { param: None })
    }

    /// Loads a tensor's values as a constant input (no gradient tracking).
    pub fn input(&mut self, t: &Tensor) -> ValueId {
        let (r, c) = t.dims2();
        let data = t.data().iter().map(|&v| v as f64).collect();
        self.push(r, c, data, Op::Leaf { param: None })
    }

    /// Binds a registry parameter as a trainable leaf. Gradients reach the
    /// registry through [`Graph::accumulate_into`].
    pub fn param(&mut self, reg: &ParameterRegistry, name: &str) -> Result<ValueId> {
        let t = reg.get(name)?;
        let (r, c) = t.dims2();
        let data = t.data().iter().map(|&v| v as f64).collect();
        Ok(self.push(
            r,
            c,
            data,
            Op::Leaf {
                param: Some(name.to_string()),
            },
        ))
    }

    /// Binds a registry parameter as a frozen constant.
    pub fn frozen(&mut self, reg: &ParameterRegistry, name: &str) -> Result<ValueId> {
        let t = reg.get(name)?;
        Ok(self.input(t))
    }

    /// Either of the above, selected by `trainable`.
    pub fn param_or_frozen(
        &mut self,
        reg: &ParameterRegistry,
        name: &str,
        trainable: bool,
    ) -> Result<ValueId> {
        if trainable {
            self.param(reg, name)
        } else {
            self.frozen(reg, name)
        }
    }

    // ── arithmetic ──────────────────────────────────────────────────

    pub fn matmul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        if k != k2 {
            return Err(NnError::DimensionMismatch {
                op: "matmul",
                lhs: vec![m, k],
                rhs: vec![k2, n],
            });
        }
        let data = matmul_raw(&self.nodes[a].data, &self.nodes[b].data, m, k, n);
        Ok(self.push(m, n, data, Op::MatMul { a, b }))
    }

    fn binary(
        &mut self,
        op_name: &'static str,
        a: ValueId,
        b: ValueId,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<ValueId> {
        let (m, n) = self.shape(a);
        let (rm, rn) = self.shape(b);
        let bc = Broadcast::resolve(op_name, m, n, rm, rn)?;
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[i * n + j] = f(
                    self.nodes[a].data[i * n + j],
                    self.nodes[b].data[bc.rhs_index(i, j, rn)],
                );
            }
        }
        Ok(self.push(m, n, data, op))
    }

    /// Elementwise sum; rhs may be [1 x n], [m x 1] or [1 x 1].
    pub fn add(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        self.binary("add", a, b, |x, y| x + y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul { a, b })
    }

    pub fn div(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        self.binary("div", a, b, |x, y| x / y, Op::Div { a, b })
    }

    pub fn scale(&mut self, a: ValueId, c: f64) -> ValueId {
        let data = self.nodes[a].data.iter().map(|&v| v * c).collect();
        let (r, cl) = self.shape(a);
        self.push(r, cl, data, Op::Scale { a, c })
    }

    pub fn add_scalar(&mut self, a: ValueId, c: f64) -> ValueId {
        let data = self.nodes[a].data.iter().map(|&v| v + c).collect();
        let (r, cl) = self.shape(a);
        self.push(r, cl, data, Op::AddScalar { a })
    }

    pub fn neg(&mut self, a: ValueId) -> ValueId {
        self.scale(a, -1.0)
    }

    pub fn transpose(&mut self, a: ValueId) -> ValueId {
        let (m, n) = self.shape(a);
        let src = &self.nodes[a].data;
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = src[i * n + j];
            }
        }
        self.push(n, m, data, Op::Transpose { a })
    }

    // ── activations ─────────────────────────────────────────────────

    pub fn relu(&mut self, a: ValueId) -> ValueId {
        let data = self.nodes[a].data.iter().map(|&v| v.max(0.0)).collect();
        let (r, c) = self.shape(a);
        self.push(r, c, data, Op::Relu { a })
    }

    pub fn tanh_act(&mut self, a: ValueId) -> ValueId {
        let data = self.nodes[a].data.iter().map(|&v| v.tanh()).collect();
        let (r, c) = self.shape(a);
        self.push(r, c, data, Op::Tanh { a })
    }

    pub fn exp(&mut self, a: ValueId) -> ValueId {
        let data = self.nodes[a].data.iter().map(|&v| v.exp()).collect();
        let (r, c) = self.shape(a);
        self.push(r, c, data, Op::Exp { a })
    }

    pub fn sqrt(&mut self, a: ValueId) -> Result<ValueId> {
        if self.nodes[a].data.iter().any(|&v| v < 0.0) {
            return Err(NnError::Numeric("sqrt of a negative value".into()));
        }
        let data = self.nodes[a].data.iter().map(|&v| v.sqrt()).collect();
        let (r, c) = self.shape(a);
        Ok(self.push(r, c, data, Op::Sqrt { a }))
    }

    pub fn clamp(&mut self, a: ValueId, lo: f64, hi: f64) -> ValueId {
        let data = self
            .nodes[a]
            .data
            .iter()
            .map(|&v| v.clamp(lo, hi))
            .collect();
        let (r, c) = self.shape(a);
        self.push(r, c, data, Op::Clamp { a, lo, hi })
    }

    // ── softmax family ──────────────────────────────────────────────

    fn check_finite(&self, op: &str, a: ValueId) -> Result<()> {
        if self.nodes[a].data.iter().any(|v| !v.is_finite()) {
            return Err(NnError::Numeric(format!("{op}: non-finite input")));
        }
        Ok(())
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&mut self, a: ValueId) -> Result<ValueId> {
        self.check_finite("softmax", a)?;
        let (m, n) = self.shape(a);
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let row = &self.nodes[a].data[i * n..(i + 1) * n];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for j in 0..n {
                let e = (row[j] - max).exp();
                data[i * n + j] = e;
                sum += e;
            }
            for j in 0..n {
                data[i * n + j] /= sum;
            }
        }
        Ok(self.push(m, n, data, Op::SoftmaxRows { a }))
    }

    /// Softmax along `axis` (0 = down columns, 1 = across rows).
    pub fn softmax(&mut self, a: ValueId, axis: usize) -> Result<ValueId> {
        match axis {
            1 => self.softmax_rows(a),
            0 => {
                let t = self.transpose(a);
                let s = self.softmax_rows(t)?;
                Ok(self.transpose(s))
            }
            _ => Err(NnError::InvalidAxis { axis, rank: 2 }),
        }
    }

    pub fn log_softmax_rows(&mut self, a: ValueId) -> Result<ValueId> {
        self.check_finite("log_softmax", a)?;
        let (m, n) = self.shape(a);
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let row = &self.nodes[a].data[i * n..(i + 1) * n];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
            for j in 0..n {
                data[i * n + j] = row[j] - lse;
            }
        }
        Ok(self.push(m, n, data, Op::LogSoftmaxRows { a }))
    }

    // ── reductions and shape ops ────────────────────────────────────

    pub fn sum_all(&mut self, a: ValueId) -> ValueId {
        let s: f64 = self.nodes[a].data.iter().sum();
        self.push(1, 1, vec![s], Op::SumAll { a })
    }

    pub fn mean_all(&mut self, a: ValueId) -> ValueId {
        let n = self.nodes[a].data.len() as f64;
        let s = self.sum_all(a);
        self.scale(s, 1.0 / n)
    }

    /// Per-row sums: [m x n] -> [m x 1].
    pub fn row_sums(&mut self, a: ValueId) -> ValueId {
        let (m, n) = self.shape(a);
        let data = (0..m)
            .map(|i| self.nodes[a].data[i * n..(i + 1) * n].iter().sum())
            .collect();
        self.push(m, 1, data, Op::RowSums { a })
    }

    /// Per-column sums: [m x n] -> [1 x n].
    pub fn col_sums(&mut self, a: ValueId) -> ValueId {
        let (m, n) = self.shape(a);
        let mut data = vec![0.0; n];
        for i in 0..m {
            for j in 0..n {
                data[j] += self.nodes[a].data[i * n + j];
            }
        }
        self.push(1, n, data, Op::ColSums { a })
    }

    /// Column-wise mean: [m x n] -> [1 x n].
    pub fn mean_over_rows(&mut self, a: ValueId) -> ValueId {
        let (m, _) = self.shape(a);
        let s = self.col_sums(a);
        self.scale(s, 1.0 / m as f64)
    }

    pub fn concat_rows(&mut self, parts: &[ValueId]) -> Result<ValueId> {
        if parts.is_empty() {
            return Err(NnError::Validation("concat_rows: no parts".into()));
        }
        let (_, cols) = self.shape(parts[0]);
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let (r, c) = self.shape(p);
            if c != cols {
                return Err(NnError::DimensionMismatch {
                    op: "concat_rows",
                    lhs: vec![rows, cols],
                    rhs: vec![r, c],
                });
            }
            rows += r;
            data.extend_from_slice(&self.nodes[p].data);
        }
        Ok(self.push(
            rows,
            cols,
            data,
            Op::ConcatRows {
                parts: parts.to_vec(),
            },
        ))
    }

    pub fn concat_cols(&mut self, parts: &[ValueId]) -> Result<ValueId> {
        if parts.is_empty() {
            return Err(NnError::Validation("concat_cols: no parts".into()));
        }
        let (rows, _) = self.shape(parts[0]);
        let mut cols = 0;
        for &p in parts {
            let (r, c) = self.shape(p);
            if r != rows {
                return Err(NnError::DimensionMismatch {
                    op: "concat_cols",
                    lhs: vec![rows, cols],
                    rhs: vec![r, c],
                });
            }
            cols += c;
        }
        let mut data = vec![0.0; rows * cols];
        let mut offset = 0;
        for &p in parts {
            let (_, c) = self.shape(p);
            for i in 0..rows {
                data[i * cols + offset..i * cols + offset + c]
                    .copy_from_slice(&self.nodes[p].data[i * c..(i + 1) * c]);
            }
            offset += c;
        }
        Ok(self.push(
            rows,
            cols,
            data,
            Op::ConcatCols {
                parts: parts.to_vec(),
            },
        ))
    }

    pub fn slice_rows(&mut self, a: ValueId, start: usize, len: usize) -> Result<ValueId> {
        let (m, n) = self.shape(a);
        if start + len > m || len == 0 {
            return Err(NnError::Validation(format!(
                "slice_rows: [{start}, {}) out of {m} rows",
                start + len
            )));
        }
        let data = self.nodes[a].data[start * n..(start + len) * n].to_vec();
        Ok(self.push(len, n, data, Op::SliceRows { a, start }))
    }

    pub fn slice_cols(&mut self, a: ValueId, start: usize, len: usize) -> Result<ValueId> {
        let (m, n) = self.shape(a);
        if start + len > n || len == 0 {
            return Err(NnError::Validation(format!(
                "slice_cols: [{start}, {}) out of {n} cols",
                start + len
            )));
        }
        let mut data = vec![0.0; m * len];
        for i in 0..m {
            data[i * len..(i + 1) * len]
                .copy_from_slice(&self.nodes[a].data[i * n + start..i * n + start + len]);
        }
        Ok(self.push(m, len, data, Op::SliceCols { a, start }))
    }

    /// Row lookup by index; gradients scatter-add back into the source rows.
    pub fn gather_rows(&mut self, a: ValueId, idx: &[usize]) -> Result<ValueId> {
        let (m, n) = self.shape(a);
        if idx.is_empty() {
            return Err(NnError::Validation("gather_rows: empty index list".into()));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= m) {
            return Err(NnError::Validation(format!(
                "gather_rows: index {bad} out of {m} rows"
            )));
        }
        let mut data = vec![0.0; idx.len() * n];
        for (out_i, &src_i) in idx.iter().enumerate() {
            data[out_i * n..(out_i + 1) * n]
                .copy_from_slice(&self.nodes[a].data[src_i * n..(src_i + 1) * n]);
        }
        Ok(self.push(
            idx.len(),
            n,
            data,
            Op::GatherRows {
                a,
                idx: idx.to_vec(),
            },
        ))
    }

    /// Repeats a [1 x n] row `rows` times; the gradient sums over copies.
    pub fn broadcast_rows(&mut self, a: ValueId, rows: usize) -> Result<ValueId> {
        let (m, n) = self.shape(a);
        if m != 1 {
            return Err(NnError::DimensionMismatch {
                op: "broadcast_rows",
                lhs: vec![m, n],
                rhs: vec![1, n],
            });
        }
        let mut data = Vec::with_capacity(rows * n);
        for _ in 0..rows {
            data.extend_from_slice(&self.nodes[a].data);
        }
        Ok(self.push(rows, n, data, Op::BroadcastRows { a }))
    }

    /// Identity on values, barrier for gradients.
    pub fn detach(&mut self, a: ValueId) -> ValueId {
        let (r, c) = self.shape(a);
        let data = self.nodes[a].data.clone();
        self.push(r, c, data, Op::Detach)
    }

    // ── backward ────────────────────────────────────────────────────

    fn add_grad(&mut self, id: ValueId, delta: &[f64]) {
        let grad = self.grads[id]
            .get_or_insert_with(|| vec![0.0; self.nodes[id].data.len()]);
        for (g, d) in grad.iter_mut().zip(delta) {
            *g += d;
        }
    }

    /// Accumulates a gradient into a possibly-broadcast rhs operand.
    fn add_grad_reduced(&mut self, id: ValueId, delta: &[f64], m: usize, n: usize, bc: Broadcast) {
        let (rm, rn) = self.shape(id);
        let mut reduced = vec![0.0; rm * rn];
        for i in 0..m {
            for j in 0..n {
                reduced[bc.rhs_index(i, j, rn)] += delta[i * n + j];
            }
        }
        self.add_grad(id, &reduced);
    }

    /// Runs reverse-mode accumulation from a scalar root.
    pub fn backward(&mut self, root: ValueId) -> Result<()> {
        let value = self.scalar_value(root)?;
        if !value.is_finite() {
            return Err(NnError::Numeric(format!(
                "backward from a non-finite value {value}"
            )));
        }
        for g in self.grads.iter_mut() {
            *g = None;
        }
        self.grads[root] = Some(vec![1.0]);

        for id in (0..=root).rev() {
            let Some(grad) = self.grads[id].clone() else {
                continue;
            };
            let (m, n) = self.shape(id);
            match self.nodes[id].op.clone() {
                Op::Leaf { .. } | Op::Detach => {}
                Op::MatMul { a, b } => {
                    let (_, k) = self.shape(a);
                    // dA = G @ B^T, dB = A^T @ G
                    let b_data = &self.nodes[b].data;
                    let mut bt = vec![0.0; k * n];
                    for p in 0..k {
                        for j in 0..n {
                            bt[j * k + p] = b_data[p * n + j];
                        }
                    }
                    let da = matmul_raw(&grad, &bt, m, n, k);
                    let a_data = &self.nodes[a].data;
                    let mut at = vec![0.0; k * m];
                    for i in 0..m {
                        for p in 0..k {
                            at[p * m + i] = a_data[i * k + p];
                        }
                    }
                    let db = matmul_raw(&at, &grad, k, m, n);
                    self.add_grad(a, &da);
                    self.add_grad(b, &db);
                }
                Op::Add { a, b } => {
                    self.add_grad(a, &grad);
                    let (rm, rn) = self.shape(b);
                    let bc = Broadcast::resolve("add", m, n, rm, rn).expect("checked at forward");
                    self.add_grad_reduced(b, &grad, m, n, bc);
                }
                Op::Sub { a, b } => {
                    self.add_grad(a, &grad);
                    let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
                    let (rm, rn) = self.shape(b);
                    let bc = Broadcast::resolve("sub", m, n, rm, rn).expect("checked at forward");
                    self.add_grad_reduced(b, &neg, m, n, bc);
                }
                Op::Mul { a, b } => {
                    let (rm, rn) = self.shape(b);
                    let bc = Broadcast::resolve("mul", m, n, rm, rn).expect("checked at forward");
                    let mut da = vec![0.0; m * n];
                    let mut db_full = vec![0.0; m * n];
                    for i in 0..m {
                        for j in 0..n {
                            let g = grad[i * n + j];
                            da[i * n + j] = g * self.nodes[b].data[bc.rhs_index(i, j, rn)];
                            db_full[i * n + j] = g * self.nodes[a].data[i * n + j];
                        }
                    }
                    self.add_grad(a, &da);
                    self.add_grad_reduced(b, &db_full, m, n, bc);
                }
                Op::Div { a, b } => {
                    let (rm, rn) = self.shape(b);
                    let bc = Broadcast::resolve("div", m, n, rm, rn).expect("checked at forward");
                    let mut da = vec![0.0; m * n];
                    let mut db_full = vec![0.0; m * n];
                    for i in 0..m {
                        for j in 0..n {
                            let g = grad[i * n + j];
                            let bv = self.nodes[b].data[bc.rhs_index(i, j, rn)];
                            let av = self.nodes[a].data[i * n + j];
                            da[i * n + j] = g / bv;
                            db_full[i * n + j] = -g * av / (bv * bv);
                        }
                    }
                    self.add_grad(a, &da);
                    self.add_grad_reduced(b, &db_full, m, n, bc);
                }
                Op::Scale { a, c } => {
                    let da: Vec<f64> = grad.iter().map(|g| g * c).collect();
                    self.add_grad(a, &da);
                }
                Op::AddScalar { a } => self.add_grad(a, &grad),
                Op::Transpose { a } => {
                    // self is [n_a x m_a] transposed from a: undo it.
                    let mut da = vec![0.0; m * n];
                    for i in 0..m {
                        for j in 0..n {
                            da[j * m + i] = grad[i * n + j];
                        }
                    }
                    self.add_grad(a, &da);
                }
                Op::Relu { a } => {
                    let da: Vec<f64> = grad
                        .iter()
                        .zip(&self.nodes[a].data)
                        .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                        .collect();
                    self.add_grad(a, &da);
                }
                Op::Tanh { a } => {
                    let da: Vec<f64> = grad
                        .iter()
                        .zip(&self.nodes[id].data)
                        .map(|(g, &t)| g * (1.0 - t * t))
                        .collect();
                    self.add_grad(a, &da);
                }
                Op::Exp { a } => {
                    let da: Vec<f64> = grad
                        .iter()
                        .zip(&self.nodes[id].data)
                        .map(|(g, &e)| g * e)
                        .collect();
                    self.add_grad(a, &da);
                }
                Op::Sqrt { a } => {
                    let da: Vec<f64> = grad
                        .iter()
                        .zip(&self.nodes[id].data)
                        .map(|(g, &s)| if s > 0.0 { g / (2.0 * s) } else { 0.0 })
                        .collect();
                    self.add_grad(a, &da);
                }
                Op::Clamp { a, lo, hi } => {
                    let da: Vec<f64> = grad
                        .iter()
                        .zip(&self.nodes[a].data)
                        .map(|(g, &x)| if x >= lo && x <= hi { *g } else { 0.0 })
                        .collect();
                    self.add_grad(a, &da);
                }
                Op::SoftmaxRows { a } => {
                    let p = &self.nodes[id].data;
                    let mut da = vec![0.0; m * n];
                    for i in 0..m {
                        let dot: f64 = (0..n)
                            .map(|j| grad[i * n + j] * p[i * n + j])
                            .sum();
                        for j in 0..n {
                            da[i * n + j] = p[i * n + j] * (grad[i * n + j] - dot);
                        }
                    }
                    self.add_grad(a, &da);
                }
                Op::LogSoftmaxRows { a } => {
                    // d/dx log_softmax: g - softmax(x) * rowsum(g)
                    let mut da = vec![0.0; m * n];
                    for i in 0..m {
                        let gsum: f64 = grad[i * n..(i + 1) * n].iter().sum();
                        for j in 0..n {
                            let p = self.nodes[id].data[i * n + j].exp();
                            da[i * n + j] = grad[i * n + j] - p * gsum;
                        }
                    }
                    self.add_grad(a, &da);
                }
                Op::SumAll { a } => {
                    let (am, an) = self.shape(a);
                    let da = vec![grad[0]; am * an];
                    self.add_grad(a, &da);
                }
                Op::RowSums { a } => {
                    let (am, an) = self.shape(a);
                    let mut da = vec![0.0; am * an];
                    for i in 0..am {
                        for j in 0..an {
                            da[i * an + j] = grad[i];
                        }
                    }
                    self.add_grad(a, &da);
                }
                Op::ColSums { a } => {
                    let (am, an) = self.shape(a);
                    let mut da = vec![0.0; am * an];
                    for i in 0..am {
                        da[i * an..(i + 1) * an].copy_from_slice(&grad);
                    }
                    self.add_grad(a, &da);
                }
                Op::ConcatRows { parts } => {
                    let mut row = 0;
                    for p in parts {
                        let (pr, pc) = self.shape(p);
                        let da = grad[row * n..(row + pr) * n].to_vec();
                        debug_assert_eq!(pc, n);
                        self.add_grad(p, &da);
                        row += pr;
                    }
                }
                Op::ConcatCols { parts } => {
                    let mut col = 0;
                    for p in parts {
                        let (pr, pc) = self.shape(p);
                        debug_assert_eq!(pr, m);
                        let mut da = vec![0.0; pr * pc];
                        for i in 0..m {
                            da[i * pc..(i + 1) * pc]
                                .copy_from_slice(&grad[i * n + col..i * n + col + pc]);
                        }
                        self.add_grad(p, &da);
                        col += pc;
                    }
                }
                Op::SliceRows { a, start } => {
                    let (am, an) = self.shape(a);
                    let mut da = vec![0.0; am * an];
                    da[start * an..(start + m) * an].copy_from_slice(&grad);
                    self.add_grad(a, &da);
                }
                Op::SliceCols { a, start } => {
                    let (am, an) = self.shape(a);
                    let mut da = vec![0.0; am * an];
                    for i in 0..m {
                        da[i * an + start..i * an + start + n]
                            .copy_from_slice(&grad[i * n..(i + 1) * n]);
                    }
                    self.add_grad(a, &da);
                }
                Op::GatherRows { a, idx } => {
                    let (am, an) = self.shape(a);
                    let mut da = vec![0.0; am * an];
                    for (out_i, &src_i) in idx.iter().enumerate() {
                        for j in 0..an {
                            da[src_i * an + j] += grad[out_i * an + j];
                        }
                    }
                    self.add_grad(a, &da);
                }
                Op::BroadcastRows { a } => {
                    let (_, an) = self.shape(a);
                    let mut da = vec![0.0; an];
                    for i in 0..m {
                        for j in 0..an {
                            da[j] += grad[i * an + j];
                        }
                    }
                    self.add_grad(a, &da);
                }
            }
        }
        Ok(())
    }

    /// Sums leaf gradients per parameter name (f64, for gradient checking).
    pub fn param_grads(&self) -> HashMap<String, Vec<f64>> {
        let mut out: HashMap<String, Vec<f64>> = HashMap::new();
        for (id, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf { param: Some(name) } = &node.op {
                if let Some(grad) = &self.grads[id] {
                    let entry = out
                        .entry(name.clone())
                        .or_insert_with(|| vec![0.0; grad.len()]);
                    for (e, g) in entry.iter_mut().zip(grad) {
                        *e += g;
                    }
                }
            }
        }
        out
    }

    /// Casts accumulated leaf gradients to f32 and adds them into the
    /// registry tensors' grad buffers.
    pub fn accumulate_into(&self, reg: &mut ParameterRegistry) -> Result<()> {
        for (name, grad) in self.param_grads() {
            let delta: Vec<f32> = grad.iter().map(|&g| g as f32).collect();
            reg.get_mut(&name)?.accumulate_grad(&delta)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn matmul_matches_hand_arithmetic() {
        let mut g = Graph::new();
        let a = g.constant(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = g.constant(2, 2, vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn matmul_identity_is_exact() {
        let mut g = Graph::new();
        let a = g.constant(2, 2, vec![1.25, -3.5, 0.75, 9.0]).unwrap();
        let eye = g.constant(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let c = g.matmul(a, eye).unwrap();
        assert_eq!(g.value(c), g.value(a));
    }

    #[test]
    fn matmul_shape_error_reports_both_shapes() {
        let mut g = Graph::new();
        let a = g.constant(2, 3, vec![0.0; 6]).unwrap();
        let b = g.constant(2, 2, vec![0.0; 4]).unwrap();
        let err = g.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[2, 2]"), "{msg}");
    }

    #[test]
    fn softmax_symmetric_and_shifted() {
        let mut g = Graph::new();
        let a = g.constant(1, 2, vec![0.0, 0.0]).unwrap();
        let s = g.softmax_rows(a).unwrap();
        assert_eq!(g.value(s), &[0.5, 0.5]);
        let b = g.constant(1, 2, vec![5.0, 5.0]).unwrap();
        let s2 = g.softmax_rows(b).unwrap();
        assert_eq!(g.value(s2), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_closed_form() {
        let mut g = Graph::new();
        let a = g.constant(1, 2, vec![0.0, 3.0f64.ln()]).unwrap();
        let s = g.softmax_rows(a).unwrap();
        assert!(close(g.value(s)[0], 0.25, 1e-12));
        assert!(close(g.value(s)[1], 0.75, 1e-12));
    }

    #[test]
    fn softmax_rejects_nan() {
        let mut g = Graph::new();
        let a = g.constant(1, 2, vec![f64::NAN, 0.0]).unwrap();
        assert!(matches!(g.softmax_rows(a), Err(NnError::Numeric(_))));
    }

    #[test]
    fn softmax_axis_zero_via_transpose() {
        let mut g = Graph::new();
        let a = g.constant(2, 1, vec![0.0, 3.0f64.ln()]).unwrap();
        let s = g.softmax(a, 0).unwrap();
        assert!(close(g.value(s)[0], 0.25, 1e-12));
        assert!(close(g.value(s)[1], 0.75, 1e-12));
        assert!(matches!(
            g.softmax(a, 2),
            Err(NnError::InvalidAxis { .. })
        ));
    }

    #[test]
    fn backward_through_mul_chain() {
        // f = sum(a * a) -> df/da = 2a
        let mut g = Graph::new();
        let a = g.constant(1, 3, vec![1.0, -2.0, 3.0]).unwrap();
        let sq = g.mul(a, a).unwrap();
        let f = g.sum_all(sq);
        g.backward(f).unwrap();
        assert_eq!(g.grad(a).unwrap(), &[2.0, -4.0, 6.0]);
    }

    #[test]
    fn broadcast_add_bias_reduces_grad() {
        let mut g = Graph::new();
        let x = g.constant(3, 2, vec![0.0; 6]).unwrap();
        let b = g.constant(1, 2, vec![1.0, 2.0]).unwrap();
        let y = g.add(x, b).unwrap();
        let f = g.sum_all(y);
        g.backward(f).unwrap();
        assert_eq!(g.grad(b).unwrap(), &[3.0, 3.0]);
    }

    #[test]
    fn detach_blocks_gradient() {
        let mut g = Graph::new();
        let a = g.constant(1, 2, vec![1.0, 2.0]).unwrap();
        let d = g.detach(a);
        let s = g.sum_all(d);
        g.backward(s).unwrap();
        assert!(g.grad(a).is_none());
        assert_eq!(g.value(d), g.value(a));
    }

    #[test]
    fn gather_rows_scatters_gradient() {
        let mut g = Graph::new();
        let table = g.constant(3, 2, vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0]).unwrap();
        let picked = g.gather_rows(table, &[2, 0, 2]).unwrap();
        assert_eq!(g.value(picked), &[3.0, 3.0, 1.0, 1.0, 3.0, 3.0]);
        let f = g.sum_all(picked);
        g.backward(f).unwrap();
        assert_eq!(g.grad(table).unwrap(), &[1.0, 1.0, 0.0, 0.0, 2.0, 2.0]);
    }

    #[test]
    fn concat_and_slice_roundtrip_grads() {
        let mut g = Graph::new();
        let a = g.constant(1, 2, vec![1.0, 2.0]).unwrap();
        let b = g.constant(1, 2, vec![3.0, 4.0]).unwrap();
        let cat = g.concat_rows(&[a, b]).unwrap();
        let top = g.slice_rows(cat, 1, 1).unwrap();
        let f = g.sum_all(top);
        g.backward(f).unwrap();
        assert_eq!(g.grad(a).unwrap(), &[0.0, 0.0]);
        assert_eq!(g.grad(b).unwrap(), &[1.0, 1.0]);
    }

    #[test]
    fn backward_requires_scalar_root() {
        let mut g = Graph::new();
        let a = g.constant(1, 2, vec![1.0, 2.0]).unwrap();
        assert!(g.backward(a).is_err());
    }
}
