//! Scalar weights of the combined training objective.

use facevc_nn::{NnError, Result};

/// Multipliers for the five auxiliary terms added to the reconstruction
/// loss. Defaults follow the published training recipe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub contrastive: f32,
    pub mutual_information: f32,
    pub id_face: f32,
    pub id_speech: f32,
    pub face_voice: f32,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            contrastive: 0.1,
            mutual_information: 0.01,
            id_face: 0.1,
            id_speech: 0.1,
            face_voice: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("contrastive", self.contrastive),
            ("mutual_information", self.mutual_information),
            ("id_face", self.id_face),
            ("id_speech", self.id_speech),
            ("face_voice", self.face_voice),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(NnError::Validation(format!(
                    "loss weight {name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_published_recipe() {
        let w = LossWeights::default();
        assert_eq!(
            (w.contrastive, w.mutual_information, w.id_face, w.id_speech, w.face_voice),
            (0.1, 0.01, 0.1, 0.1, 1.0)
        );
        w.validate().unwrap();
    }

    #[test]
    fn negative_weight_rejected() {
        let w = LossWeights {
            contrastive: -0.5,
            ..Default::default()
        };
        assert!(w.validate().is_err());
    }
}
