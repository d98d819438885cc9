//! Model dimensions. Every width here is a knob; the defaults are the toy
//! desk-scale settings used by the synthetic pipeline and the test suite.

use facevc_nn::{NnError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Face feature width fed to the face query encoder.
    pub d_face: usize,
    /// Audio feature width fed to the speaker query encoder.
    pub d_aud: usize,
    /// Speaker style code width.
    pub d_spk: usize,
    /// Content code width.
    pub d_con: usize,
    /// Codebook size for content quantization.
    pub k_codes: usize,
    /// Number of learnable query prompts.
    pub prompt_count: usize,
    /// Mel bands produced by the decoder.
    pub d_mel: usize,
    /// Memory slots in the face-to-voice mapping.
    pub memory_slots: usize,
    /// Pitch embedding width.
    pub d_pitch: usize,
    /// Number of pitch bins over the normalized log-F0 range.
    pub pitch_bins: usize,
    /// Normalized log-F0 range covered by the bins.
    pub pitch_lo: f32,
    pub pitch_hi: f32,
    /// Attention key width.
    pub d_k: usize,
    /// Attention head count.
    pub n_heads: usize,
    /// Hidden width of the query encoders' output FFN.
    pub ffn_hidden: usize,
    /// Hidden width of the content encoder.
    pub content_hidden: usize,
    /// Hidden width of the mel decoder.
    pub decoder_hidden: usize,
    /// Steps ahead predicted by the content contrastive objective.
    pub cpc_horizon: usize,
    /// Fixed affine applied to log-mel inputs before the encoders.
    pub mel_mean: f32,
    pub mel_std: f32,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_face: 64,
            d_aud: 64,
            d_spk: 32,
            d_con: 16,
            k_codes: 64,
            prompt_count: 4,
            d_mel: 80,
            memory_slots: 16,
            d_pitch: 8,
            pitch_bins: 16,
            pitch_lo: -3.0,
            pitch_hi: 3.0,
            d_k: 16,
            n_heads: 1,
            ffn_hidden: 64,
            content_hidden: 32,
            decoder_hidden: 64,
            cpc_horizon: 2,
            mel_mean: -5.75,
            mel_std: 4.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_face", self.d_face),
            ("d_aud", self.d_aud),
            ("d_spk", self.d_spk),
            ("d_con", self.d_con),
            ("prompt_count", self.prompt_count),
            ("d_mel", self.d_mel),
            ("memory_slots", self.memory_slots),
            ("d_pitch", self.d_pitch),
            ("pitch_bins", self.pitch_bins),
            ("d_k", self.d_k),
            ("n_heads", self.n_heads),
            ("ffn_hidden", self.ffn_hidden),
            ("content_hidden", self.content_hidden),
            ("decoder_hidden", self.decoder_hidden),
            ("cpc_horizon", self.cpc_horizon),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(NnError::Validation(format!("{name} must be positive")));
            }
        }
        if self.k_codes < 2 {
            return Err(NnError::Validation(
                "k_codes must be at least 2 (a one-entry codebook cannot quantize)".into(),
            ));
        }
        if self.d_k % self.n_heads != 0 {
            return Err(NnError::Validation(format!(
                "d_k {} must be divisible by n_heads {}",
                self.d_k, self.n_heads
            )));
        }
        if self.d_face % self.n_heads != 0 || self.d_aud % self.n_heads != 0 {
            return Err(NnError::Validation(
                "value widths must be divisible by n_heads".into(),
            ));
        }
        if !(self.mel_std > 0.0) {
            return Err(NnError::Validation(format!(
                "mel_std must be positive, got {}",
                self.mel_std
            )));
        }
        if !(self.pitch_lo < self.pitch_hi) {
            return Err(NnError::Validation(format!(
                "pitch range [{}, {}] is empty",
                self.pitch_lo, self.pitch_hi
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ModelConfig::default().validate().unwrap();
    }

    #[test]
    fn tiny_codebook_rejected() {
        let cfg = ModelConfig {
            k_codes: 1,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn head_split_must_divide() {
        let cfg = ModelConfig {
            n_heads: 3,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
