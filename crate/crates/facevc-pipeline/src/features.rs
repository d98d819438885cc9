//! Shared feature preparation: waveform to mel tensor and pitch points.

use std::path::Path;

use facevc_dsp::{extract_f0, mel_spectrogram, read_wav, MelSpectrogram, StftConfig};
use facevc_model::PitchPoint;
use facevc_nn::Tensor;

use crate::error::{PipelineError, Result};

pub fn mel_to_tensor(mel: &MelSpectrogram) -> Result<Tensor> {
    Tensor::new(vec![mel.frames(), mel.bands()], mel.data().to_vec()).map_err(Into::into)
}

pub fn tensor_to_mel(t: &Tensor) -> Result<MelSpectrogram> {
    let (frames, bands) = t.dims2();
    MelSpectrogram::new(frames, bands, t.data().to_vec()).map_err(Into::into)
}

/// Analysis products of one utterance.
pub struct PreparedAudio {
    pub mel: Tensor,
    pub pitch: Vec<PitchPoint>,
}

pub fn prepare_wav(path: &Path, cfg: &StftConfig) -> Result<PreparedAudio> {
    let wav = read_wav(path)?;
    prepare_waveform(&wav, cfg)
}

pub fn prepare_waveform(
    wav: &facevc_dsp::Waveform,
    cfg: &StftConfig,
) -> Result<PreparedAudio> {
    let mel = mel_spectrogram(wav, cfg)?;
    let track = extract_f0(wav, cfg)?;
    if track.len() != mel.frames() {
        return Err(PipelineError::Validation(format!(
            "pitch frames ({}) disagree with mel frames ({})",
            track.len(),
            mel.frames()
        )));
    }
    let pitch = track
        .frames
        .iter()
        .zip(&track.normalized)
        .map(|(f, &value)| PitchPoint {
            voiced: f.voiced,
            value,
        })
        .collect();
    Ok(PreparedAudio {
        mel: mel_to_tensor(&mel)?,
        pitch,
    })
}
