//! Reconstruction loss and the weighted combination of all objectives.

use facevc_nn::ops::mse;
use facevc_nn::{Graph, NnError, Result, ValueId};

use crate::weights::LossWeights;

/// Mean squared error between a mel spectrogram and its reconstruction.
pub fn recon_loss(g: &mut Graph, mel: ValueId, mel_hat: ValueId) -> Result<ValueId> {
    mse(g, mel, mel_hat)
}

/// The named terms entering the combined objective.
#[derive(Debug, Clone, Copy)]
pub struct LossParts {
    pub reconstruction: ValueId,
    pub contrastive: ValueId,
    pub mutual_information: ValueId,
    pub id_face: ValueId,
    pub id_speech: ValueId,
    pub face_voice: ValueId,
}

impl LossParts {
    fn named(&self) -> [(&'static str, ValueId); 6] {
        [
            ("reconstruction", self.reconstruction),
            ("contrastive", self.contrastive),
            ("mutual_information", self.mutual_information),
            ("id_face", self.id_face),
            ("id_speech", self.id_speech),
            ("face_voice", self.face_voice),
        ]
    }

    /// Current scalar values in declaration order, for logging.
    pub fn values(&self, g: &Graph) -> Result<[f64; 6]> {
        let mut out = [0.0; 6];
        for (slot, (_, id)) in out.iter_mut().zip(self.named()) {
            *slot = g.scalar_value(id)?;
        }
        Ok(out)
    }
}

/// reconstruction + w1*contrastive + w2*MI + w3*id_face + w4*id_speech +
/// w5*face_voice. Rejects non-finite parts, naming the offender.
pub fn total_loss(g: &mut Graph, parts: &LossParts, w: &LossWeights) -> Result<ValueId> {
    w.validate()?;
    for (name, id) in parts.named() {
        let v = g.scalar_value(id)?;
        if !v.is_finite() {
            return Err(NnError::Numeric(format!(
                "loss term {name} is non-finite: {v}"
            )));
        }
    }
    let mut acc = parts.reconstruction;
    for (id, weight) in [
        (parts.contrastive, w.contrastive),
        (parts.mutual_information, w.mutual_information),
        (parts.id_face, w.id_face),
        (parts.id_speech, w.id_speech),
        (parts.face_voice, w.face_voice),
    ] {
        let scaled = g.scale(id, weight as f64);
        acc = g.add(acc, scaled)?;
    }
    Ok(acc)
}
