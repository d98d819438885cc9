//! Learned face-to-voice mapping: soft attention over a bank of key/value
//! memory slots turns a queried face feature into a speaker style code.

use facevc_nn::{Graph, MatParam, ParameterRegistry, Result, Tensor, ValueId};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::ModelConfig;

#[derive(Debug, Clone)]
pub struct VoiceMemory {
    pub keys: MatParam,
    pub values: MatParam,
    d_spk: usize,
}

/// Slot rows drawn on a shell of radius `target`. Keys start at 2 sqrt(d):
/// unit-norm queries then see logits of about twice their cosine to each
/// slot, so the slot weighting discriminates from the first step instead of
/// starting uniform and collapsing every query onto the value mean. Values
/// start on the unit shell so early outputs are spread rather than tiny.
fn shell_init<R: Rng>(rng: &mut R, slots: usize, d: usize, target: f32) -> Result<Tensor> {
    let mut data = Vec::with_capacity(slots * d);
    for _ in 0..slots {
        let row: Vec<f32> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = row.iter().map(|v| v * v).sum::<f32>().sqrt().max(1e-6);
        data.extend(row.iter().map(|v| v * target / norm));
    }
    Tensor::new(vec![slots, d], data)
}

impl VoiceMemory {
    pub fn new<R: Rng>(
        reg: &mut ParameterRegistry,
        rng: &mut R,
        name: &str,
        cfg: &ModelConfig,
    ) -> Result<Self> {
        let keys = shell_init(rng, cfg.memory_slots, cfg.d_spk, 2.0 * (cfg.d_spk as f32).sqrt())?;
        let values = shell_init(rng, cfg.memory_slots, cfg.d_spk, 1.0)?;
        Ok(Self {
            keys: MatParam::with_init(reg, &format!("{name}.keys"), keys)?,
            values: MatParam::with_init(reg, &format!("{name}.values"), values)?,
            d_spk: cfg.d_spk,
        })
    }

    /// query [N x d_spk] -> softmax(query keys^T / sqrt(d_spk)) values.
    pub fn map(
        &self,
        g: &mut Graph,
        reg: &ParameterRegistry,
        query: ValueId,
        trainable: bool,
    ) -> Result<ValueId> {
        let keys = self.keys.bind(g, reg, trainable)?;
        let values = self.values.bind(g, reg, trainable)?;
        let kt = g.transpose(keys);
        let logits = g.matmul(query, kt)?;
        let scaled = g.scale(logits, 1.0 / (self.d_spk as f64).sqrt());
        let weights = g.softmax_rows(scaled)?;
        g.matmul(weights, values)
    }
}
