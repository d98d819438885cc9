//! Content encoder: per-frame FFN into a low-width code space, vector
//! quantization with a straight-through gradient, and a predictive
//! contrastive objective over future frames.

use facevc_nn::{
    Graph, LinearLayer, MatParam, NnError, ParameterRegistry, Result, Tensor, ValueId,
};
use rand::Rng;

use crate::config::ModelConfig;

/// Nearest codeword per row by squared Euclidean distance; ties break to the
/// lowest index.
pub fn nearest_codewords(z: &[f64], t: usize, d: usize, codebook: &[f64], k: usize) -> Vec<usize> {
    let mut indices = Vec::with_capacity(t);
    for row in 0..t {
        let zrow = &z[row * d..(row + 1) * d];
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for code in 0..k {
            let crow = &codebook[code * d..(code + 1) * d];
            let dist: f64 = zrow
                .iter()
                .zip(crow)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if dist < best_dist {
                best_dist = dist;
                best = code;
            }
        }
        indices.push(best);
    }
    indices
}

/// Quantization results, all live on the graph.
pub struct VqOutput {
    pub indices: Vec<usize>,
    /// Straight-through codes: forward value is the codeword, gradient flows
    /// to the pre-quantization input unchanged.
    pub quantized: ValueId,
    /// mean ||z - sg(codeword)||^2, pulls the encoder toward the codebook.
    pub commitment: ValueId,
    /// mean ||sg(z) - codeword||^2, the term that actually moves codewords
    /// under gradient descent.
    pub codebook_loss: ValueId,
}

#[derive(Debug, Clone)]
pub struct ContentEncoder {
    l1: LinearLayer,
    l2: LinearLayer,
    pub codebook: MatParam,
    predictors: Vec<MatParam>,
    d_con: usize,
    k_codes: usize,
    mel_mean: f32,
    mel_std: f32,
}

impl ContentEncoder {
    pub fn new<R: Rng>(
        reg: &mut ParameterRegistry,
        rng: &mut R,
        name: &str,
        cfg: &ModelConfig,
    ) -> Result<Self> {
        let init = distinct_codebook_init(cfg.k_codes, cfg.d_con, rng)?;
        let codebook = MatParam::with_init(reg, &format!("{name}.codebook"), init)?;
        let mut predictors = Vec::with_capacity(cfg.cpc_horizon);
        for step in 1..=cfg.cpc_horizon {
            predictors.push(MatParam::new(
                reg,
                rng,
                &format!("{name}.predict{step}"),
                cfg.d_con,
                cfg.d_con,
            )?);
        }
        Ok(Self {
            l1: LinearLayer::new(reg, rng, &format!("{name}.l1"), cfg.d_mel, cfg.content_hidden)?,
            l2: LinearLayer::new(reg, rng, &format!("{name}.l2"), cfg.content_hidden, cfg.d_con)?,
            codebook,
            predictors,
            d_con: cfg.d_con,
            k_codes: cfg.k_codes,
            mel_mean: cfg.mel_mean,
            mel_std: cfg.mel_std,
        })
    }

    /// mel [T x d_mel] -> pre-quantization codes [T x d_con].
    ///
    /// The input is standardized by the shared fixed affine, then the
    /// per-utterance mean frame is subtracted: the static spectral envelope
    /// (the speaker's timbre) is removed from the content path, so
    /// reconstruction has to pull it from the speaker code.
    pub fn encode(
        &self,
        g: &mut Graph,
        reg: &ParameterRegistry,
        mel: ValueId,
        trainable: bool,
    ) -> Result<ValueId> {
        let centered = g.add_scalar(mel, -self.mel_mean as f64);
        let scaled = g.scale(centered, 1.0 / self.mel_std as f64);
        let mean_frame = g.mean_over_rows(scaled);
        let dynamic = g.sub(scaled, mean_frame)?;
        let h = self.l1.forward(g, reg, dynamic, trainable)?;
        let h = g.relu(h);
        self.l2.forward(g, reg, h, trainable)
    }

    /// Snaps each row of `z` to its nearest codeword.
    pub fn quantize(
        &self,
        g: &mut Graph,
        reg: &ParameterRegistry,
        z: ValueId,
        trainable: bool,
    ) -> Result<VqOutput> {
        let (t, d) = g.shape(z);
        if d != self.d_con {
            return Err(NnError::DimensionMismatch {
                op: "vq_quantize",
                lhs: vec![t, d],
                rhs: vec![self.k_codes, self.d_con],
            });
        }
        let cb = self.codebook.bind(g, reg, trainable)?;
        let (k, _) = g.shape(cb);
        if k == 0 {
            return Err(NnError::Validation("empty codebook".into()));
        }
        let indices = nearest_codewords(g.value(z), t, d, g.value(cb), k);
        let picked = g.gather_rows(cb, &indices)?;

        // Straight-through: value == codeword, d/dz == identity.
        let gap = g.sub(picked, z)?;
        let gap_const = g.detach(gap);
        let quantized = g.add(z, gap_const)?;

        let picked_const = g.detach(picked);
        let commitment = facevc_nn::ops::mse(g, z, picked_const)?;
        let z_const = g.detach(z);
        let codebook_loss = facevc_nn::ops::mse(g, picked, z_const)?;

        Ok(VqOutput {
            indices,
            quantized,
            commitment,
            codebook_loss,
        })
    }

    /// Predictive contrastive loss over the pre-quantization sequence: for
    /// each step offset 1..=horizon a linear predictor scores the true
    /// future frame against every other frame of the sequence.
    pub fn predictive_loss(
        &self,
        g: &mut Graph,
        reg: &ParameterRegistry,
        z: ValueId,
        trainable: bool,
    ) -> Result<ValueId> {
        let (t, _) = g.shape(z);
        let horizon = self.predictors.len();
        if t <= horizon {
            return Err(NnError::Validation(format!(
                "sequence of {t} frames is too short for a {horizon}-step predictive loss"
            )));
        }
        let zt = g.transpose(z);
        let mut per_step = Vec::with_capacity(horizon);
        for (i, predictor) in self.predictors.iter().enumerate() {
            let step = i + 1;
            let past = g.slice_rows(z, 0, t - step)?;
            let w = predictor.bind(g, reg, trainable)?;
            let pred = g.matmul(past, w)?;
            let scores = g.matmul(pred, zt)?;
            let positives: Vec<usize> = (0..t - step).map(|row| row + step).collect();
            per_step.push(info_nce(g, scores, &positives)?);
        }
        let stacked = g.concat_cols(&per_step)?;
        Ok(g.mean_all(stacked))
    }
}

/// Mean over rows of -log softmax(scores)[row, positive_col].
pub fn info_nce(g: &mut Graph, scores: ValueId, positive_cols: &[usize]) -> Result<ValueId> {
    let (rows, cols) = g.shape(scores);
    if positive_cols.len() != rows {
        return Err(NnError::Validation(format!(
            "{} positive columns for {rows} score rows",
            positive_cols.len()
        )));
    }
    if cols < 2 {
        return Err(NnError::Validation(
            "scores need at least one negative candidate".into(),
        ));
    }
    let mut mask = vec![0.0f32; rows * cols];
    for (row, &col) in positive_cols.iter().enumerate() {
        if col >= cols {
            return Err(NnError::Validation(format!(
                "positive column {col} out of {cols}"
            )));
        }
        mask[row * cols + col] = 1.0;
    }
    let mask_t = Tensor::new(vec![rows, cols], mask)?;
    let mask_v = g.input(&mask_t);
    let lsm = g.log_softmax_rows(scores)?;
    let picked = g.mul(lsm, mask_v)?;
    let total = g.sum_all(picked);
    Ok(g.scale(total, -1.0 / rows as f64))
}

fn distinct_codebook_init<R: Rng>(k: usize, d: usize, rng: &mut R) -> Result<Tensor> {
    let bound = 1.0 / k as f32;
    for _ in 0..64 {
        let t = Tensor::uniform(vec![k, d], -bound, bound, rng)?;
        let mut distinct = true;
        'outer: for i in 0..k {
            for j in (i + 1)..k {
                if t.data()[i * d..(i + 1) * d] == t.data()[j * d..(j + 1) * d] {
                    distinct = false;
                    break 'outer;
                }
            }
        }
        if distinct {
            return Ok(t);
        }
    }
    Err(NnError::Validation(
        "failed to draw a codebook with distinct entries".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_encoder(seed: u64) -> (ParameterRegistry, ContentEncoder, ModelConfig) {
        let cfg = ModelConfig {
            d_mel: 6,
            content_hidden: 5,
            d_con: 2,
            k_codes: 4,
            cpc_horizon: 2,
            ..Default::default()
        };
        let mut reg = ParameterRegistry::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let enc = ContentEncoder::new(&mut reg, &mut rng, "content", &cfg).unwrap();
        (reg, enc, cfg)
    }

    fn with_codebook(reg: &mut ParameterRegistry, rows: Vec<Vec<f32>>) {
        let t = Tensor::from_rows(&rows).unwrap();
        reg.load_values("content.codebook", &t).unwrap();
    }

    #[test]
    fn hand_arithmetic_nearest_index() {
        let (mut reg, enc, _) = toy_encoder(0);
        with_codebook(&mut reg, vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![9.0, 9.0], vec![9.0, -9.0]]);
        let mut g = Graph::new();
        let z = g.constant(1, 2, vec![0.2, 0.1]).unwrap();
        let out = enc.quantize(&mut g, &reg, z, false).unwrap();
        // squared distances 0.05 vs 1.45 favor codeword 0
        assert_eq!(out.indices, vec![0]);
    }

    #[test]
    fn exact_codeword_has_zero_commitment() {
        let (mut reg, enc, _) = toy_encoder(0);
        with_codebook(&mut reg, vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 0.0], vec![0.0, 2.0]]);
        let mut g = Graph::new();
        let z = g.constant(1, 2, vec![1.0, 1.0]).unwrap();
        let out = enc.quantize(&mut g, &reg, z, false).unwrap();
        assert_eq!(out.indices, vec![1]);
        assert_eq!(g.scalar_value(out.commitment).unwrap(), 0.0);
        assert_eq!(g.value(out.quantized), &[1.0, 1.0]);
    }

    #[test]
    fn exact_tie_breaks_to_lowest_index() {
        let (mut reg, enc, _) = toy_encoder(0);
        with_codebook(&mut reg, vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![5.0, 5.0], vec![6.0, 6.0]]);
        let mut g = Graph::new();
        let z = g.constant(1, 2, vec![0.5, 0.5]).unwrap();
        let out = enc.quantize(&mut g, &reg, z, false).unwrap();
        assert_eq!(out.indices, vec![0]);
    }

    #[test]
    fn indices_match_brute_force_scan() {
        let (reg, enc, cfg) = toy_encoder(7);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let t = 250;
        let z_t = Tensor::uniform(vec![t, cfg.d_con], -1.0, 1.0, &mut rng).unwrap();
        let mut g = Graph::new();
        let z = g.input(&z_t);
        let out = enc.quantize(&mut g, &reg, z, false).unwrap();

        let cb = reg.get("content.codebook").unwrap();
        for row in 0..t {
            let zrow = &z_t.data()[row * cfg.d_con..(row + 1) * cfg.d_con];
            let mut best = usize::MAX;
            let mut best_d = f32::INFINITY;
            for k in 0..cfg.k_codes {
                let crow = &cb.data()[k * cfg.d_con..(k + 1) * cfg.d_con];
                let dist: f32 = zrow.iter().zip(crow).map(|(a, b)| (a - b) * (a - b)).sum();
                if dist < best_d {
                    best_d = dist;
                    best = k;
                }
            }
            assert_eq!(out.indices[row], best, "row {row}");
        }
    }

    #[test]
    fn straight_through_gradient_equality() {
        // Gradient of a loss w.r.t. z equals the gradient w.r.t. the
        // quantized output, element for element.
        let (reg, enc, cfg) = toy_encoder(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z_t = Tensor::uniform(vec![4, cfg.d_con], -1.0, 1.0, &mut rng).unwrap();
        let mut g = Graph::new();
        let z = g.input(&z_t);
        let out = enc.quantize(&mut g, &reg, z, false).unwrap();
        let weights = g
            .constant(4, cfg.d_con, (0..4 * cfg.d_con).map(|i| 0.3 + i as f64).collect())
            .unwrap();
        let prod = g.mul(out.quantized, weights).unwrap();
        let loss = g.sum_all(prod);
        g.backward(loss).unwrap();
        let gz = g.grad(z).unwrap();
        let gq = g.grad(out.quantized).unwrap();
        assert_eq!(gz, gq);
    }

    #[test]
    fn quantized_rows_are_exact_codebook_rows() {
        let (reg, enc, cfg) = toy_encoder(11);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let z_t = Tensor::uniform(vec![16, cfg.d_con], -0.5, 0.5, &mut rng).unwrap();
        let mut g = Graph::new();
        let z = g.input(&z_t);
        let out = enc.quantize(&mut g, &reg, z, false).unwrap();
        let cb = reg.get("content.codebook").unwrap();
        for (row, &idx) in out.indices.iter().enumerate() {
            let got: Vec<f32> = g.value(out.quantized)[row * cfg.d_con..(row + 1) * cfg.d_con]
                .iter()
                .map(|&v| v as f32)
                .collect();
            let want = &cb.data()[idx * cfg.d_con..(idx + 1) * cfg.d_con];
            assert_eq!(got.as_slice(), want);
        }
    }

    #[test]
    fn info_nce_uniform_scores_give_ln_n() {
        let mut g = Graph::new();
        let scores = g.constant(3, 5, vec![0.7; 15]).unwrap();
        let loss = info_nce(&mut g, scores, &[0, 2, 4]).unwrap();
        assert!((g.scalar_value(loss).unwrap() - 5.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn info_nce_saturated_positive_is_near_zero() {
        let mut g = Graph::new();
        let scores = g.constant(1, 4, vec![30.0, 0.0, 0.0, 0.0]).unwrap();
        let loss = info_nce(&mut g, scores, &[0]).unwrap();
        assert!(g.scalar_value(loss).unwrap() < 1e-9);
    }

    #[test]
    fn info_nce_two_candidate_closed_form() {
        let mut g = Graph::new();
        let scores = g.constant(1, 2, vec![1.0, 0.0]).unwrap();
        let loss = info_nce(&mut g, scores, &[0]).unwrap();
        let expected = -(1.0f64.exp() / (1.0f64.exp() + 1.0)).ln();
        let got = g.scalar_value(loss).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.3133).abs() < 1e-4);
    }

    #[test]
    fn predictive_loss_rejects_short_sequences() {
        let (reg, enc, cfg) = toy_encoder(1);
        let mut g = Graph::new();
        let z = g.constant(2, cfg.d_con, vec![0.0; 2 * cfg.d_con]).unwrap();
        assert!(enc.predictive_loss(&mut g, &reg, z, false).is_err());
        let z3 = g.constant(3, cfg.d_con, vec![0.1; 3 * cfg.d_con]).unwrap();
        assert!(enc.predictive_loss(&mut g, &reg, z3, false).is_ok());
    }

    #[test]
    fn codebook_entries_are_distinct_after_init() {
        let (reg, _, cfg) = toy_encoder(17);
        let cb = reg.get("content.codebook").unwrap();
        for i in 0..cfg.k_codes {
            for j in (i + 1)..cfg.k_codes {
                assert_ne!(
                    &cb.data()[i * cfg.d_con..(i + 1) * cfg.d_con],
                    &cb.data()[j * cfg.d_con..(j + 1) * cfg.d_con]
                );
            }
        }
    }
}
