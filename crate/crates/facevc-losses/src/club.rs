//! Variational upper bound on the mutual information between speaker and
//! content codes, with the auxiliary density network it requires.
//!
//! The bound is (1/N^2) sum_i sum_j [log q(con_i | spk_i) - log q(con_j |
//! spk_i)] for a fitted diagonal-Gaussian conditional q. It can be negative
//! while q is poorly fitted.

use facevc_nn::{Graph, LinearLayer, NnError, ParameterRegistry, Result, ValueId};
use rand::Rng;

const LOG_TWO_PI: f64 = 1.8378770664093453;
const LOGVAR_LO: f64 = -8.0;
const LOGVAR_HI: f64 = 8.0;

/// Two-layer conditional density: speaker code -> (mean, log-variance) of a
/// diagonal Gaussian over the pooled content space. Log-variances are
/// clamped to [-8, 8].
#[derive(Debug, Clone)]
pub struct VariationalNet {
    hidden: LinearLayer,
    mean: LinearLayer,
    logvar: LinearLayer,
    d_con: usize,
}

impl VariationalNet {
    pub fn new<R: Rng>(
        reg: &mut ParameterRegistry,
        rng: &mut R,
        name: &str,
        d_spk: usize,
        hidden: usize,
        d_con: usize,
    ) -> Result<Self> {
        Ok(Self {
            hidden: LinearLayer::new(reg, rng, &format!("{name}.hidden"), d_spk, hidden)?,
            mean: LinearLayer::new(reg, rng, &format!("{name}.mean"), hidden, d_con)?,
            logvar: LinearLayer::new(reg, rng, &format!("{name}.logvar"), hidden, d_con)?,
            d_con,
        })
    }

    /// spk [N x d_spk] -> (mean [N x d_con], clamped logvar [N x d_con]).
    pub fn forward(
        &self,
        g: &mut Graph,
        reg: &ParameterRegistry,
        spk: ValueId,
        trainable: bool,
    ) -> Result<(ValueId, ValueId)> {
        let h = self.hidden.forward(g, reg, spk, trainable)?;
        let h = g.tanh_act(h);
        let mean = self.mean.forward(g, reg, h, trainable)?;
        let logvar = self.logvar.forward(g, reg, h, trainable)?;
        let logvar = g.clamp(logvar, LOGVAR_LO, LOGVAR_HI);
        Ok((mean, logvar))
    }

    pub fn d_con(&self) -> usize {
        self.d_con
    }
}

/// [N x N] matrix of log q(con_j | spk_i) for diagonal Gaussians with
/// per-row parameters (mean_i, logvar_i).
fn log_density_matrix(
    g: &mut Graph,
    mean: ValueId,
    logvar: ValueId,
    con: ValueId,
) -> Result<ValueId> {
    let (_, d) = g.shape(con);
    let neg_lv = g.neg(logvar);
    let precision = g.exp(neg_lv);

    // sum_d con_j^2 * prec_i  ->  prec [N x d] @ (con^2)^T [d x N]
    let con_sq = g.mul(con, con)?;
    let con_sq_t = g.transpose(con_sq);
    let t_quad = g.matmul(precision, con_sq_t)?;

    // -2 sum_d con_j * mean_i * prec_i
    let mp = g.mul(mean, precision)?;
    let con_t = g.transpose(con);
    let t_cross = g.matmul(mp, con_t)?;

    // sum_d mean_i^2 * prec_i and sum_d logvar_i, both [N x 1] broadcast.
    let mean_sq = g.mul(mean, mp)?;
    let t_mean = g.row_sums(mean_sq);
    let t_lv = g.row_sums(logvar);

    let twice_cross = g.scale(t_cross, 2.0);
    let quad = g.sub(t_quad, twice_cross)?;
    let quad = g.add(quad, t_mean)?;
    let quad = g.add(quad, t_lv)?;
    let quad = g.add_scalar(quad, d as f64 * LOG_TWO_PI);
    Ok(g.scale(quad, -0.5))
}

/// The sampled MI upper bound. `con` is one pooled content vector per
/// sample. q is typically frozen here and fitted separately via
/// [`qnet_nll`].
pub fn club_mi_upper(
    g: &mut Graph,
    reg: &ParameterRegistry,
    spk: ValueId,
    con: ValueId,
    q: &VariationalNet,
    trainable_q: bool,
) -> Result<ValueId> {
    let (n, _) = g.shape(spk);
    let (nc, dc) = g.shape(con);
    if nc != n {
        return Err(NnError::DimensionMismatch {
            op: "club_mi_upper",
            lhs: vec![n, g.shape(spk).1],
            rhs: vec![nc, dc],
        });
    }
    if dc != q.d_con() {
        return Err(NnError::DimensionMismatch {
            op: "club_mi_upper(q)",
            lhs: vec![nc, dc],
            rhs: vec![nc, q.d_con()],
        });
    }
    let (mean, logvar) = q.forward(g, reg, spk, trainable_q)?;
    let logq = log_density_matrix(g, mean, logvar, con)?;

    let mut eye = vec![0.0f64; n * n];
    for i in 0..n {
        eye[i * n + i] = 1.0;
    }
    let eye_v = g.constant(n, n, eye)?;
    let diag = g.mul(logq, eye_v)?;
    let trace = g.sum_all(diag);
    let total = g.sum_all(logq);
    let scaled_trace = g.scale(trace, n as f64);
    let diff = g.sub(scaled_trace, total)?;
    let bound = g.scale(diff, 1.0 / (n * n) as f64);

    let value = g.scalar_value(bound)?;
    if !value.is_finite() {
        return Err(NnError::Numeric(format!(
            "mutual-information bound is non-finite: {value}"
        )));
    }
    Ok(bound)
}

/// Mean negative log-likelihood of con_i under q(. | spk_i); the fitting
/// objective for the density network, minimized before each bound
/// evaluation.
pub fn qnet_nll(
    g: &mut Graph,
    reg: &ParameterRegistry,
    spk: ValueId,
    con: ValueId,
    q: &VariationalNet,
    trainable_q: bool,
) -> Result<ValueId> {
    let (n, _) = g.shape(spk);
    let (nc, dc) = g.shape(con);
    if nc != n || dc != q.d_con() {
        return Err(NnError::DimensionMismatch {
            op: "qnet_nll",
            lhs: vec![n, g.shape(spk).1],
            rhs: vec![nc, dc],
        });
    }
    let (mean, logvar) = q.forward(g, reg, spk, trainable_q)?;
    let diff = g.sub(con, mean)?;
    let sq = g.mul(diff, diff)?;
    let neg_lv = g.neg(logvar);
    let precision = g.exp(neg_lv);
    let weighted = g.mul(sq, precision)?;
    let inner = g.add(weighted, logvar)?;
    let inner = g.add_scalar(inner, LOG_TWO_PI);
    let halved = g.scale(inner, 0.5);
    let total = g.sum_all(halved);
    let loss = g.scale(total, 1.0 / n as f64);

    let value = g.scalar_value(loss)?;
    if !value.is_finite() {
        return Err(NnError::Numeric(format!(
            "density fit objective is non-finite: {value}"
        )));
    }
    Ok(loss)
}
