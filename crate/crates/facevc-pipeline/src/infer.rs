//! Inference: source audio supplies content and pitch, a face supplies the
//! speaker style, the decoder produces a mel and phase reconstruction turns
//! it into audio.

use std::path::{Path, PathBuf};

use facevc_dsp::{griffin_lim, write_wav};
use facevc_nn::{Graph, Tensor};

use crate::checkpoint::LoadedCheckpoint;
use crate::error::{PipelineError, Result};
use crate::features::{prepare_wav, tensor_to_mel};
use crate::idfv;

pub struct InferenceOutput {
    pub mel: Tensor,
    pub mel_path: PathBuf,
    pub wav_path: PathBuf,
}

/// Face frames enter as [T x d_face] (or a single [d_face] row).
pub fn generate_mel(
    ckpt: &LoadedCheckpoint,
    face_frames: &Tensor,
    source_mel: &Tensor,
    source_pitch: &[facevc_model::PitchPoint],
) -> Result<Tensor> {
    let (_, d) = face_frames.dims2();
    if d != ckpt.cfg.model.d_face {
        return Err(PipelineError::Validation(format!(
            "face frames are {d}-wide but the checkpoint expects {}",
            ckpt.cfg.model.d_face
        )));
    }
    let mut g = Graph::new();
    let face = g.input(face_frames);
    let spk = ckpt
        .model
        .speaker_code_from_face(&mut g, &ckpt.registry, face, false)?;

    let mel = g.input(source_mel);
    let z = ckpt
        .model
        .content_encoder
        .encode(&mut g, &ckpt.registry, mel, false)?;
    let vq = ckpt
        .model
        .content_encoder
        .quantize(&mut g, &ckpt.registry, z, false)?;
    let pitch = ckpt
        .model
        .pitch
        .embed(&mut g, &ckpt.registry, source_pitch, false)?;
    let mel_hat = ckpt
        .model
        .decoder
        .decode(&mut g, &ckpt.registry, spk, vq.quantized, pitch, false)?;
    Ok(g.value_tensor(mel_hat))
}

pub fn infer(
    ckpt: &LoadedCheckpoint,
    face_path: &Path,
    source_wav: &Path,
    out_dir: &Path,
) -> Result<InferenceOutput> {
    std::fs::create_dir_all(out_dir)?;
    let face_frames = idfv::read_tensor(face_path)?;
    let audio = prepare_wav(source_wav, &ckpt.cfg.stft)?;

    let mel_hat = generate_mel(ckpt, &face_frames, &audio.mel, &audio.pitch)?;

    let mel_path = out_dir.join("output_mel.idfv");
    idfv::write_tensor(&mel_path, &mel_hat)?;

    let mel_struct = tensor_to_mel(&mel_hat)?;
    let wav = griffin_lim(
        &mel_struct,
        &ckpt.cfg.stft,
        ckpt.cfg.griffin_lim_iters,
        ckpt.cfg.seed,
    )?;
    let wav_path = out_dir.join("output.wav");
    write_wav(&wav_path, &wav)?;

    Ok(InferenceOutput {
        mel: mel_hat,
        mel_path,
        wav_path,
    })
}
