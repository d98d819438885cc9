//! Flat key=value run configuration. Every knob has a default; unknown keys
//! are rejected.

use std::path::Path;

use facevc_dsp::StftConfig;
use facevc_losses::LossWeights;
use facevc_model::ModelConfig;

use crate::error::{PipelineError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub momentum: f32,
    pub q_steps: usize,
    pub q_learning_rate: f32,
    pub grad_clip: f32,
    pub q_grad_clip: f32,
    pub qnet_hidden: usize,
    pub tau: f32,
    pub weights: LossWeights,
    pub cpc_weight: f32,
    pub commitment_weight: f32,
    pub codebook_weight: f32,
    pub model: ModelConfig,
    pub stft: StftConfig,
    pub speakers: usize,
    pub utterances_per_speaker: usize,
    pub face_frames: usize,
    pub utterance_seconds: f32,
    pub griffin_lim_iters: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            epochs: 30,
            batch_size: 16,
            learning_rate: 1e-3,
            momentum: 0.9,
            q_steps: 5,
            q_learning_rate: 1e-2,
            grad_clip: 0.0,
            q_grad_clip: 5.0,
            qnet_hidden: 32,
            tau: 0.07,
            weights: LossWeights::default(),
            cpc_weight: 0.1,
            commitment_weight: 0.25,
            codebook_weight: 1.0,
            model: ModelConfig::default(),
            stft: StftConfig::default(),
            speakers: 4,
            utterances_per_speaker: 50,
            face_frames: 8,
            utterance_seconds: 0.5,
            griffin_lim_iters: 60,
        }
    }
}

macro_rules! parse_into {
    ($value:expr, $key:expr, $slot:expr) => {
        $slot = $value.parse().map_err(|_| {
            PipelineError::Validation(format!("bad value {:?} for key {:?}", $value, $key))
        })?
    };
}

impl RunConfig {
    pub fn apply_line(&mut self, line: &str) -> Result<()> {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            return Ok(());
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| {
            PipelineError::Validation(format!("expected key=value, got {trimmed:?}"))
        })?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "seed" => parse_into!(value, key, self.seed),
            "epochs" => parse_into!(value, key, self.epochs),
            "batch_size" => parse_into!(value, key, self.batch_size),
            "learning_rate" => parse_into!(value, key, self.learning_rate),
            "momentum" => parse_into!(value, key, self.momentum),
            "q_steps" => parse_into!(value, key, self.q_steps),
            "q_learning_rate" => parse_into!(value, key, self.q_learning_rate),
            "grad_clip" => parse_into!(value, key, self.grad_clip),
            "q_grad_clip" => parse_into!(value, key, self.q_grad_clip),
            "qnet_hidden" => parse_into!(value, key, self.qnet_hidden),
            "tau" => parse_into!(value, key, self.tau),
            "lambda1" => parse_into!(value, key, self.weights.contrastive),
            "lambda2" => parse_into!(value, key, self.weights.mutual_information),
            "lambda3" => parse_into!(value, key, self.weights.id_face),
            "lambda4" => parse_into!(value, key, self.weights.id_speech),
            "lambda5" => parse_into!(value, key, self.weights.face_voice),
            "cpc_weight" => parse_into!(value, key, self.cpc_weight),
            "commitment_weight" => parse_into!(value, key, self.commitment_weight),
            "codebook_weight" => parse_into!(value, key, self.codebook_weight),
            "d_face" => parse_into!(value, key, self.model.d_face),
            "d_aud" => parse_into!(value, key, self.model.d_aud),
            "d_spk" => parse_into!(value, key, self.model.d_spk),
            "d_con" => parse_into!(value, key, self.model.d_con),
            "k_codes" => parse_into!(value, key, self.model.k_codes),
            "prompts" => parse_into!(value, key, self.model.prompt_count),
            "d_mel" => {
                parse_into!(value, key, self.model.d_mel);
                self.stft.n_mels = self.model.d_mel;
            }
            "memory_slots" => parse_into!(value, key, self.model.memory_slots),
            "d_pitch" => parse_into!(value, key, self.model.d_pitch),
            "pitch_bins" => parse_into!(value, key, self.model.pitch_bins),
            "pitch_lo" => parse_into!(value, key, self.model.pitch_lo),
            "pitch_hi" => parse_into!(value, key, self.model.pitch_hi),
            "d_k" => parse_into!(value, key, self.model.d_k),
            "n_heads" => parse_into!(value, key, self.model.n_heads),
            "ffn_hidden" => parse_into!(value, key, self.model.ffn_hidden),
            "content_hidden" => parse_into!(value, key, self.model.content_hidden),
            "decoder_hidden" => parse_into!(value, key, self.model.decoder_hidden),
            "cpc_horizon" => parse_into!(value, key, self.model.cpc_horizon),
            "mel_mean" => parse_into!(value, key, self.model.mel_mean),
            "mel_std" => parse_into!(value, key, self.model.mel_std),
            "sample_rate" => parse_into!(value, key, self.stft.sample_rate),
            "fft_size" => parse_into!(value, key, self.stft.fft_size),
            "win_length" => parse_into!(value, key, self.stft.win_length),
            "hop" => parse_into!(value, key, self.stft.hop),
            "fmin" => parse_into!(value, key, self.stft.fmin),
            "fmax" => parse_into!(value, key, self.stft.fmax),
            "log_floor" => parse_into!(value, key, self.stft.log_floor),
            "speakers" => parse_into!(value, key, self.speakers),
            "utterances_per_speaker" => parse_into!(value, key, self.utterances_per_speaker),
            "face_frames" => parse_into!(value, key, self.face_frames),
            "utterance_seconds" => parse_into!(value, key, self.utterance_seconds),
            "griffin_lim_iters" => parse_into!(value, key, self.griffin_lim_iters),
            other => {
                return Err(PipelineError::Validation(format!(
                    "unknown config key {other:?}"
                )))
            }
        }
        Ok(())
    }

    pub fn from_str(contents: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for line in contents.lines() {
            cfg.apply_line(line)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let contents = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
        Self::from_str(&contents)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("q_steps", self.q_steps),
            ("face_frames", self.face_frames),
            ("griffin_lim_iters", self.griffin_lim_iters),
            ("qnet_hidden", self.qnet_hidden),
        ] {
            if v == 0 {
                return Err(PipelineError::Validation(format!("{name} must be positive")));
            }
        }
        if !(self.grad_clip >= 0.0) || !(self.q_grad_clip >= 0.0) {
            return Err(PipelineError::Validation(
                "gradient clips must be nonnegative (0 disables clipping)".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || !(self.q_learning_rate > 0.0) {
            return Err(PipelineError::Validation(
                "learning rates must be positive".into(),
            ));
        }
        if !(self.momentum >= 0.0 && self.momentum < 1.0) {
            return Err(PipelineError::Validation(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.tau > 0.0) {
            return Err(PipelineError::Validation("tau must be positive".into()));
        }
        if !(self.utterance_seconds > 0.0) {
            return Err(PipelineError::Validation(
                "utterance_seconds must be positive".into(),
            ));
        }
        self.weights.validate()?;
        self.model.validate()?;
        self.stft.validate()?;
        if self.model.d_mel != self.stft.n_mels {
            return Err(PipelineError::Validation(format!(
                "d_mel {} disagrees with the analysis band count {}",
                self.model.d_mel, self.stft.n_mels
            )));
        }
        Ok(())
    }

    /// Canonical text form; parsing it back reproduces the config.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        };
        kv("seed", self.seed.to_string());
        kv("epochs", self.epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("learning_rate", self.learning_rate.to_string());
        kv("momentum", self.momentum.to_string());
        kv("q_steps", self.q_steps.to_string());
        kv("q_learning_rate", self.q_learning_rate.to_string());
        kv("grad_clip", self.grad_clip.to_string());
        kv("q_grad_clip", self.q_grad_clip.to_string());
        kv("qnet_hidden", self.qnet_hidden.to_string());
        kv("tau", self.tau.to_string());
        kv("lambda1", self.weights.contrastive.to_string());
        kv("lambda2", self.weights.mutual_information.to_string());
        kv("lambda3", self.weights.id_face.to_string());
        kv("lambda4", self.weights.id_speech.to_string());
        kv("lambda5", self.weights.face_voice.to_string());
        kv("cpc_weight", self.cpc_weight.to_string());
        kv("commitment_weight", self.commitment_weight.to_string());
        kv("codebook_weight", self.codebook_weight.to_string());
        kv("d_face", self.model.d_face.to_string());
        kv("d_aud", self.model.d_aud.to_string());
        kv("d_spk", self.model.d_spk.to_string());
        kv("d_con", self.model.d_con.to_string());
        kv("k_codes", self.model.k_codes.to_string());
        kv("prompts", self.model.prompt_count.to_string());
        kv("d_mel", self.model.d_mel.to_string());
        kv("memory_slots", self.model.memory_slots.to_string());
        kv("d_pitch", self.model.d_pitch.to_string());
        kv("pitch_bins", self.model.pitch_bins.to_string());
        kv("pitch_lo", self.model.pitch_lo.to_string());
        kv("pitch_hi", self.model.pitch_hi.to_string());
        kv("d_k", self.model.d_k.to_string());
        kv("n_heads", self.model.n_heads.to_string());
        kv("ffn_hidden", self.model.ffn_hidden.to_string());
        kv("content_hidden", self.model.content_hidden.to_string());
        kv("decoder_hidden", self.model.decoder_hidden.to_string());
        kv("cpc_horizon", self.model.cpc_horizon.to_string());
        kv("mel_mean", self.model.mel_mean.to_string());
        kv("mel_std", self.model.mel_std.to_string());
        kv("sample_rate", self.stft.sample_rate.to_string());
        kv("fft_size", self.stft.fft_size.to_string());
        kv("win_length", self.stft.win_length.to_string());
        kv("hop", self.stft.hop.to_string());
        kv("fmin", self.stft.fmin.to_string());
        kv("fmax", self.stft.fmax.to_string());
        kv("log_floor", self.stft.log_floor.to_string());
        kv("speakers", self.speakers.to_string());
        kv("utterances_per_speaker", self.utterances_per_speaker.to_string());
        kv("face_frames", self.face_frames.to_string());
        kv("utterance_seconds", self.utterance_seconds.to_string());
        kv("griffin_lim_iters", self.griffin_lim_iters.to_string());
        s
    }
}
