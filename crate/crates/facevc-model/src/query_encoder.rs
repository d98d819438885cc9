//! Prompt-query encoders.
//!
//! A set of learnable prompt vectors is refined by self-attention, then
//! either cross-attended against face features (face side) or conditioned by
//! a pooled audio row appended to the prompt stack (speaker side, which has
//! no cross-attention stage). An output FFN maps each prompt row to the code
//! width, and mean pooling over the prompt axis yields the final vector.

use facevc_nn::ops::scaled_dot_attention;
use facevc_nn::{Graph, LinearLayer, MatParam, NnError, ParameterRegistry, Result, ValueId};
use rand::Rng;

use crate::config::ModelConfig;

/// q/k/v projection matrices for one attention stage (no biases).
#[derive(Debug, Clone)]
pub struct AttentionWeights {
    pub wq: MatParam,
    pub wk: MatParam,
    pub wv: MatParam,
    n_heads: usize,
}

impl AttentionWeights {
    pub fn new<R: Rng>(
        reg: &mut ParameterRegistry,
        rng: &mut R,
        prefix: &str,
        query_in: usize,
        kv_in: usize,
        d_k: usize,
        d_v: usize,
        n_heads: usize,
    ) -> Result<Self> {
        Ok(Self {
            wq: MatParam::new(reg, rng, &format!("{prefix}.wq"), query_in, d_k)?,
            wk: MatParam::new(reg, rng, &format!("{prefix}.wk"), kv_in, d_k)?,
            wv: MatParam::new(reg, rng, &format!("{prefix}.wv"), kv_in, d_v)?,
            n_heads,
        })
    }

    /// Projects inputs and applies (multi-head) scaled dot attention.
    pub fn apply(
        &self,
        g: &mut Graph,
        reg: &ParameterRegistry,
        query_src: ValueId,
        kv_src: ValueId,
        trainable: bool,
    ) -> Result<ValueId> {
        let wq = self.wq.bind(g, reg, trainable)?;
        let wk = self.wk.bind(g, reg, trainable)?;
        let wv = self.wv.bind(g, reg, trainable)?;
        let q = g.matmul(query_src, wq)?;
        let k = g.matmul(kv_src, wk)?;
        let v = g.matmul(kv_src, wv)?;
        multi_head_attention(g, q, k, v, self.n_heads)
    }
}

/// Column-split multi-head wrapper around the single-head primitive.
pub fn multi_head_attention(
    g: &mut Graph,
    q: ValueId,
    k: ValueId,
    v: ValueId,
    n_heads: usize,
) -> Result<ValueId> {
    if n_heads == 1 {
        return scaled_dot_attention(g, q, k, v);
    }
    let (_, dk) = g.shape(q);
    let (_, dv) = g.shape(v);
    if dk % n_heads != 0 || dv % n_heads != 0 {
        return Err(NnError::Validation(format!(
            "widths ({dk}, {dv}) not divisible by {n_heads} heads"
        )));
    }
    let (hk, hv) = (dk / n_heads, dv / n_heads);
    let mut heads = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let qh = g.slice_cols(q, h * hk, hk)?;
        let kh = g.slice_cols(k, h * hk, hk)?;
        let vh = g.slice_cols(v, h * hv, hv)?;
        heads.push(scaled_dot_attention(g, qh, kh, vh)?);
    }
    g.concat_cols(&heads)
}

/// Shared output head: two affine maps with a ReLU between.
#[derive(Debug, Clone)]
pub struct OutputFfn {
    l1: LinearLayer,
    l2: LinearLayer,
}

impl OutputFfn {
    fn new<R: Rng>(
        reg: &mut ParameterRegistry,
        rng: &mut R,
        prefix: &str,
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
    ) -> Result<Self> {
        Ok(Self {
            l1: LinearLayer::new(reg, rng, &format!("{prefix}.ffn1"), in_dim, hidden)?,
            l2: LinearLayer::new(reg, rng, &format!("{prefix}.ffn2"), hidden, out_dim)?,
        })
    }

    fn forward(
        &self,
        g: &mut Graph,
        reg: &ParameterRegistry,
        x: ValueId,
        trainable: bool,
    ) -> Result<ValueId> {
        let h = self.l1.forward(g, reg, x, trainable)?;
        let h = g.relu(h);
        self.l2.forward(g, reg, h, trainable)
    }
}

/// Face-side encoder: prompt self-attention, cross-attention against the
/// face feature sequence, output FFN, mean pool.
#[derive(Debug, Clone)]
pub struct FaceQueryEncoder {
    pub prompts: MatParam,
    self_attn: AttentionWeights,
    cross_attn: AttentionWeights,
    ffn: OutputFfn,
    d_face: usize,
}

impl FaceQueryEncoder {
    pub fn new<R: Rng>(
        reg: &mut ParameterRegistry,
        rng: &mut R,
        name: &str,
        cfg: &ModelConfig,
    ) -> Result<Self> {
        let d = cfg.d_face;
        Ok(Self {
            prompts: MatParam::new(reg, rng, &format!("{name}.prompts"), cfg.prompt_count, d)?,
            self_attn: AttentionWeights::new(
                reg,
                rng,
                &format!("{name}.self"),
                d,
                d,
                cfg.d_k,
                d,
                cfg.n_heads,
            )?,
            cross_attn: AttentionWeights::new(
                reg,
                rng,
                &format!("{name}.cross"),
                d,
                d,
                cfg.d_k,
                d,
                cfg.n_heads,
            )?,
            ffn: OutputFfn::new(reg, rng, name, d, cfg.ffn_hidden, cfg.d_spk)?,
            d_face: d,
        })
    }

    /// `face_seq` is an [L x d_face] feature sequence (an averaged face
    /// embedding enters as a single row). Returns (pooled query feature
    /// [1 x d_spk], per-prompt pre-pool features [P x d_spk]).
    pub fn forward(
        &self,
        g: &mut Graph,
        reg: &ParameterRegistry,
        face_seq: ValueId,
        trainable: bool,
    ) -> Result<(ValueId, ValueId)> {
        let (_, d) = g.shape(face_seq);
        if d != self.d_face {
            return Err(NnError::DimensionMismatch {
                op: "face_query_encoder",
                lhs: vec![g.shape(face_seq).0, d],
                rhs: vec![self.prompts.rows(), self.d_face],
            });
        }
        let prompts = self.prompts.bind(g, reg, trainable)?;
        let refined = self.self_attn.apply(g, reg, prompts, prompts, trainable)?;
        let queried = self.cross_attn.apply(g, reg, refined, face_seq, trainable)?;
        let per_prompt = self.ffn.forward(g, reg, queried, trainable)?;
        let pooled = g.mean_over_rows(per_prompt);
        Ok((pooled, per_prompt))
    }
}

/// Speaker-side encoder: the pooled audio feature row joins the prompt stack
/// before self-attention; there is no cross-attention stage.
#[derive(Debug, Clone)]
pub struct SpeakerQueryEncoder {
    pub prompts: MatParam,
    self_attn: AttentionWeights,
    ffn: OutputFfn,
    adapter: LinearLayer,
    d_aud: usize,
    mel_mean: f32,
    mel_std: f32,
}

impl SpeakerQueryEncoder {
    pub fn new<R: Rng>(
        reg: &mut ParameterRegistry,
        rng: &mut R,
        name: &str,
        cfg: &ModelConfig,
    ) -> Result<Self> {
        let d = cfg.d_aud;
        Ok(Self {
            prompts: MatParam::new(reg, rng, &format!("{name}.prompts"), cfg.prompt_count, d)?,
            self_attn: AttentionWeights::new(
                reg,
                rng,
                &format!("{name}.self"),
                d,
                d,
                cfg.d_k,
                d,
                cfg.n_heads,
            )?,
            ffn: OutputFfn::new(reg, rng, name, d, cfg.ffn_hidden, cfg.d_spk)?,
            adapter: LinearLayer::new(reg, rng, &format!("{name}.adapter"), cfg.d_mel, d)?,
            d_aud: d,
            mel_mean: cfg.mel_mean,
            mel_std: cfg.mel_std,
        })
    }

    /// Core op on prepared audio features [L x d_aud]; returns the speaker
    /// code [1 x d_spk] and the pre-pool rows [(P+1) x d_spk].
    ///
    /// The code is read from the appended audio row after self-attention
    /// (the prompt rows are sample-independent, so averaging them in would
    /// drown the audio-conditioned direction), then unit-normalized so the
    /// mapping target and identity logits cannot drift in scale.
    pub fn forward_features(
        &self,
        g: &mut Graph,
        reg: &ParameterRegistry,
        audio_feat: ValueId,
        trainable: bool,
    ) -> Result<(ValueId, ValueId)> {
        let (_, d) = g.shape(audio_feat);
        if d != self.d_aud {
            return Err(NnError::DimensionMismatch {
                op: "speaker_query_encoder",
                lhs: vec![g.shape(audio_feat).0, d],
                rhs: vec![self.prompts.rows(), self.d_aud],
            });
        }
        let prompts = self.prompts.bind(g, reg, trainable)?;
        let pooled_audio = g.mean_over_rows(audio_feat);
        let stacked = g.concat_rows(&[prompts, pooled_audio])?;
        let attended = self.self_attn.apply(g, reg, stacked, stacked, trainable)?;
        // Residual keeps each row's own signal dominant over the mixture.
        let refined = g.add(attended, stacked)?;
        let per_prompt = self.ffn.forward(g, reg, refined, trainable)?;
        let audio_row = g.slice_rows(per_prompt, self.prompts.rows(), 1)?;
        let code = facevc_nn::ops::l2_normalize_rows(g, audio_row)?;
        Ok((code, per_prompt))
    }

    /// Full path from a [T x d_mel] spectrogram: fixed standardization,
    /// adapter, then the query stack.
    pub fn forward_mel(
        &self,
        g: &mut Graph,
        reg: &ParameterRegistry,
        mel: ValueId,
        trainable: bool,
    ) -> Result<(ValueId, ValueId)> {
        let centered = g.add_scalar(mel, -self.mel_mean as f64);
        let scaled = g.scale(centered, 1.0 / self.mel_std as f64);
        let feats = self.adapter.forward(g, reg, scaled, trainable)?;
        self.forward_features(g, reg, feats, trainable)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use facevc_nn::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_cfg() -> ModelConfig {
        ModelConfig {
            d_face: 8,
            d_aud: 8,
            d_spk: 6,
            d_mel: 10,
            d_k: 4,
            prompt_count: 4,
            ffn_hidden: 8,
            ..Default::default()
        }
    }

    #[test]
    fn face_output_shape_is_dspk_for_any_p_and_l() {
        let cfg = toy_cfg();
        for (p, l) in [(1usize, 1usize), (4, 3), (7, 5)] {
            let mut reg = ParameterRegistry::new();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let cfg_p = ModelConfig {
                prompt_count: p,
                ..cfg.clone()
            };
            let enc = FaceQueryEncoder::new(&mut reg, &mut rng, "face", &cfg_p).unwrap();
            let mut g = Graph::new();
            let seq = Tensor::uniform(vec![l, cfg.d_face], -1.0, 1.0, &mut rng).unwrap();
            let sv = g.input(&seq);
            let (pooled, pre) = enc.forward(&mut g, &reg, sv, false).unwrap();
            assert_eq!(g.shape(pooled), (1, cfg.d_spk));
            assert_eq!(g.shape(pre), (p, cfg.d_spk));
        }
    }

    #[test]
    fn speaker_zero_inputs_zero_prompts_give_zero_output() {
        let cfg = toy_cfg();
        let mut reg = ParameterRegistry::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let enc = SpeakerQueryEncoder::new(&mut reg, &mut rng, "spk", &cfg).unwrap();
        // Zero the prompts; biases are zero-initialized already.
        let p = cfg.prompt_count;
        reg.load_values("spk.prompts", &Tensor::zeros(vec![p, cfg.d_aud]).unwrap())
            .unwrap();
        let mut g = Graph::new();
        let feats = g.constant(5, cfg.d_aud, vec![0.0; 5 * cfg.d_aud]).unwrap();
        let (pooled, _) = enc.forward_features(&mut g, &reg, feats, false).unwrap();
        assert!(g.value(pooled).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn speaker_output_shape_ignores_sequence_length() {
        let cfg = toy_cfg();
        let mut reg = ParameterRegistry::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let enc = SpeakerQueryEncoder::new(&mut reg, &mut rng, "spk", &cfg).unwrap();
        for l in [1usize, 4, 33] {
            let mut g = Graph::new();
            let feats = Tensor::uniform(vec![l, cfg.d_aud], -1.0, 1.0, &mut rng).unwrap();
            let fv = g.input(&feats);
            let (pooled, pre) = enc.forward_features(&mut g, &reg, fv, false).unwrap();
            assert_eq!(g.shape(pooled), (1, cfg.d_spk));
            assert_eq!(g.shape(pre), (cfg.prompt_count + 1, cfg.d_spk));
        }
    }

    #[test]
    fn single_face_row_with_identity_values_reaches_every_prompt() {
        // With the cross value projection set to identity, a length-1 face
        // sequence makes every cross-attention row equal that projected row.
        let cfg = toy_cfg();
        let mut reg = ParameterRegistry::new();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let enc = FaceQueryEncoder::new(&mut reg, &mut rng, "face", &cfg).unwrap();
        let d = cfg.d_face;
        let mut eye = vec![0.0f32; d * d];
        for i in 0..d {
            eye[i * d + i] = 1.0;
        }
        reg.load_values("face.cross.wv", &Tensor::new(vec![d, d], eye).unwrap())
            .unwrap();

        let mut g = Graph::new();
        let face = Tensor::uniform(vec![1, d], -1.0, 1.0, &mut rng).unwrap();
        let fv = g.input(&face);
        let prompts = enc.prompts.bind(&mut g, &reg, false).unwrap();
        let refined = enc
            .self_attn
            .apply(&mut g, &reg, prompts, prompts, false)
            .unwrap();
        let crossed = enc.cross_attn.apply(&mut g, &reg, refined, fv, false).unwrap();
        let expect: Vec<f64> = face.data().iter().map(|&v| v as f64).collect();
        for row in 0..cfg.prompt_count {
            let got = &g.value(crossed)[row * d..(row + 1) * d];
            for (a, b) in got.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn prompt_permutation_permutes_prepool_rows() {
        let cfg = toy_cfg();
        let mut reg = ParameterRegistry::new();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let enc = FaceQueryEncoder::new(&mut reg, &mut rng, "face", &cfg).unwrap();
        let face = Tensor::uniform(vec![3, cfg.d_face], -1.0, 1.0, &mut rng).unwrap();

        let mut g = Graph::new();
        let fv = g.input(&face);
        let (_, pre) = enc.forward(&mut g, &reg, fv, false).unwrap();
        let base = g.value(pre).to_vec();

        // Rotate the prompt rows by one and compare.
        let p = cfg.prompt_count;
        let d = cfg.d_face;
        let orig = reg.get("face.prompts").unwrap().data().to_vec();
        let mut rotated = vec![0.0f32; orig.len()];
        for r in 0..p {
            rotated[r * d..(r + 1) * d].copy_from_slice(&orig[((r + 1) % p) * d..((r + 1) % p + 1) * d]);
        }
        reg.load_values("face.prompts", &Tensor::new(vec![p, d], rotated).unwrap())
            .unwrap();

        let mut g2 = Graph::new();
        let fv2 = g2.input(&face);
        let (_, pre2) = enc.forward(&mut g2, &reg, fv2, false).unwrap();
        let perm = g2.value(pre2);

        let ds = cfg.d_spk;
        for r in 0..p {
            let expect = &base[((r + 1) % p) * ds..((r + 1) % p + 1) * ds];
            let got = &perm[r * ds..(r + 1) * ds];
            for (a, b) in got.iter().zip(expect) {
                assert!((a - b).abs() < 1e-9, "row {r}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn multi_head_matches_expected_shape_and_differs_from_single() {
        let mut g = Graph::new();
        let q = g.constant(3, 4, (0..12).map(|v| v as f64 * 0.1).collect()).unwrap();
        let k = g.constant(5, 4, (0..20).map(|v| (v as f64).sin()).collect()).unwrap();
        let v = g.constant(5, 6, (0..30).map(|v| (v as f64).cos()).collect()).unwrap();
        let one = multi_head_attention(&mut g, q, k, v, 1).unwrap();
        let two = multi_head_attention(&mut g, q, k, v, 2).unwrap();
        assert_eq!(g.shape(one), (3, 6));
        assert_eq!(g.shape(two), (3, 6));
        let delta: f64 = g
            .value(one)
            .iter()
            .zip(g.value(two))
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(delta > 1e-9);
    }
}
