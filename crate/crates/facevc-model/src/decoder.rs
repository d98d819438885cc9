//! Frame-wise mel decoder: speaker code broadcast over time, concatenated
//! with content and pitch rows, through a three-layer FFN with a residual
//! middle block.

use facevc_nn::{Graph, LinearLayer, NnError, ParameterRegistry, Result, ValueId};
use rand::Rng;

use crate::config::ModelConfig;

#[derive(Debug, Clone)]
pub struct MelDecoder {
    l1: LinearLayer,
    l2: LinearLayer,
    l3: LinearLayer,
}

impl MelDecoder {
    pub fn new<R: Rng>(
        reg: &mut ParameterRegistry,
        rng: &mut R,
        name: &str,
        cfg: &ModelConfig,
    ) -> Result<Self> {
        let in_dim = cfg.d_spk + cfg.d_con + cfg.d_pitch;
        let h = cfg.decoder_hidden;
        Ok(Self {
            l1: LinearLayer::new(reg, rng, &format!("{name}.l1"), in_dim, h)?,
            l2: LinearLayer::new(reg, rng, &format!("{name}.l2"), h, h)?,
            l3: LinearLayer::new(reg, rng, &format!("{name}.l3"), h, cfg.d_mel)?,
        })
    }

    /// spk [1 x d_spk], content [T x d_con], pitch [T x d_pitch] -> mel
    /// frames [T x d_mel].
    pub fn decode(
        &self,
        g: &mut Graph,
        reg: &ParameterRegistry,
        spk: ValueId,
        content: ValueId,
        pitch: ValueId,
        trainable: bool,
    ) -> Result<ValueId> {
        let (t, dc) = g.shape(content);
        let (tp, dp) = g.shape(pitch);
        if t != tp {
            return Err(NnError::DimensionMismatch {
                op: "decode_mel",
                lhs: vec![t, dc],
                rhs: vec![tp, dp],
            });
        }
        let spk_rows = g.broadcast_rows(spk, t)?;
        let x = g.concat_cols(&[spk_rows, content, pitch])?;
        let h1 = self.l1.forward(g, reg, x, trainable)?;
        let h1 = g.relu(h1);
        let h2 = self.l2.forward(g, reg, h1, trainable)?;
        let h2 = g.relu(h2);
        let h2 = g.add(h1, h2)?;
        self.l3.forward(g, reg, h2, trainable)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use facevc_nn::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> (ParameterRegistry, MelDecoder, ModelConfig) {
        let cfg = ModelConfig {
            d_spk: 4,
            d_con: 3,
            d_pitch: 2,
            d_mel: 5,
            decoder_hidden: 6,
            ..Default::default()
        };
        let mut reg = ParameterRegistry::new();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dec = MelDecoder::new(&mut reg, &mut rng, "dec", &cfg).unwrap();
        (reg, dec, cfg)
    }

    #[test]
    fn output_shape_and_length_preservation() {
        let (reg, dec, cfg) = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in [1usize, 2, 7, 64, 512] {
            let mut g = Graph::new();
            let spk = Tensor::uniform(vec![1, cfg.d_spk], -1.0, 1.0, &mut rng).unwrap();
            let con = Tensor::uniform(vec![t, cfg.d_con], -1.0, 1.0, &mut rng).unwrap();
            let pit = Tensor::uniform(vec![t, cfg.d_pitch], -1.0, 1.0, &mut rng).unwrap();
            let s = g.input(&spk);
            let c = g.input(&con);
            let p = g.input(&pit);
            let mel = dec.decode(&mut g, &reg, s, c, p, false).unwrap();
            assert_eq!(g.shape(mel), (t, cfg.d_mel));
            assert!(g.value(mel).iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn zero_inputs_with_zero_biases_give_zero_output() {
        let (reg, dec, cfg) = toy();
        let mut g = Graph::new();
        let s = g.constant(1, cfg.d_spk, vec![0.0; cfg.d_spk]).unwrap();
        let c = g.constant(3, cfg.d_con, vec![0.0; 3 * cfg.d_con]).unwrap();
        let p = g.constant(3, cfg.d_pitch, vec![0.0; 3 * cfg.d_pitch]).unwrap();
        let mel = dec.decode(&mut g, &reg, s, c, p, false).unwrap();
        assert!(g.value(mel).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn length_mismatch_is_a_dimension_error() {
        let (reg, dec, cfg) = toy();
        let mut g = Graph::new();
        let s = g.constant(1, cfg.d_spk, vec![0.0; cfg.d_spk]).unwrap();
        let c = g.constant(3, cfg.d_con, vec![0.0; 3 * cfg.d_con]).unwrap();
        let p = g.constant(2, cfg.d_pitch, vec![0.0; 2 * cfg.d_pitch]).unwrap();
        assert!(matches!(
            dec.decode(&mut g, &reg, s, c, p, false),
            Err(NnError::DimensionMismatch { .. })
        ));
    }
}
