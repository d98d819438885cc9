//! Composite graph operations shared across the model and loss stacks.

use crate::error::{NnError, Result};
use crate::graph::{Graph, ValueId};
use crate::tensor::Tensor;

/// softmax(q k^T / sqrt(d_k)) v with q [Tq x d], k [Tk x d], v [Tk x dv].
pub fn scaled_dot_attention(g: &mut Graph, q: ValueId, k: ValueId, v: ValueId) -> Result<ValueId> {
    let (_, dq) = g.shape(q);
    let (tk, dk) = g.shape(k);
    let (tv, _) = g.shape(v);
    if dq != dk {
        return Err(NnError::DimensionMismatch {
            op: "scaled_dot_attention(q,k)",
            lhs: vec![g.shape(q).0, dq],
            rhs: vec![tk, dk],
        });
    }
    if tk != tv {
        return Err(NnError::DimensionMismatch {
            op: "scaled_dot_attention(k,v)",
            lhs: vec![tk, dk],
            rhs: vec![tv, g.shape(v).1],
        });
    }
    let kt = g.transpose(k);
    let logits = g.matmul(q, kt)?;
    let scaled = g.scale(logits, 1.0 / (dk as f64).sqrt());
    let weights = g.softmax_rows(scaled)?;
    g.matmul(weights, v)
}

/// Checks that every row of `targets` is one-hot: a single 1.0, rest 0.0.
pub fn validate_one_hot(targets: &Tensor) -> Result<()> {
    let (rows, cols) = targets.dims2();
    for i in 0..rows {
        let row = &targets.data()[i * cols..(i + 1) * cols];
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != cols {
            return Err(NnError::Validation(format!(
                "target row {i} is not one-hot: {row:?}"
            )));
        }
    }
    Ok(())
}

/// Mean negative log-likelihood of one-hot targets under row softmax:
/// -(1/N) sum_n sum_c t log softmax(logits).
pub fn cross_entropy(g: &mut Graph, logits: ValueId, targets: &Tensor) -> Result<ValueId> {
    let (n, c) = g.shape(logits);
    let (tn, tc) = targets.dims2();
    if (tn, tc) != (n, c) {
        return Err(NnError::DimensionMismatch {
            op: "cross_entropy",
            lhs: vec![n, c],
            rhs: vec![tn, tc],
        });
    }
    validate_one_hot(targets)?;
    let mask = g.input(targets);
    let lsm = g.log_softmax_rows(logits)?;
    let picked = g.mul(lsm, mask)?;
    let total = g.sum_all(picked);
    Ok(g.scale(total, -1.0 / n as f64))
}

/// Rows rescaled to unit Euclidean norm (small epsilon guards empty rows).
pub fn l2_normalize_rows(g: &mut Graph, x: ValueId) -> Result<ValueId> {
    let sq = g.mul(x, x)?;
    let sums = g.row_sums(sq);
    let safe = g.add_scalar(sums, 1e-24);
    let norms = g.sqrt(safe)?;
    g.div(x, norms)
}

/// Mean squared error over all elements; shapes must match exactly.
pub fn mse(g: &mut Graph, a: ValueId, b: ValueId) -> Result<ValueId> {
    if g.shape(a) != g.shape(b) {
        let (lm, ln) = g.shape(a);
        let (rm, rn) = g.shape(b);
        return Err(NnError::DimensionMismatch {
            op: "mse",
            lhs: vec![lm, ln],
            rhs: vec![rm, rn],
        });
    }
    let d = g.sub(a, b)?;
    let sq = g.mul(d, d)?;
    Ok(g.mean_all(sq))
}
