//! Face interpolation: blend two unit-normalized queried face features and
//! map the blend to a speaker code. The endpoints reuse the single-face
//! path verbatim, so alpha 0 and 1 reproduce plain inference bit for bit.

use std::path::{Path, PathBuf};

use facevc_dsp::{griffin_lim, write_wav};
use facevc_nn::{Graph, Tensor};

use crate::checkpoint::LoadedCheckpoint;
use crate::error::{PipelineError, Result};
use crate::features::{prepare_wav, tensor_to_mel};
use crate::idfv;

pub struct InterpOutput {
    pub blend_query: Tensor,
    pub speaker_code: Tensor,
    pub mel: Option<Tensor>,
}

pub fn blend_speaker_code(
    ckpt: &LoadedCheckpoint,
    face_a: &Tensor,
    face_b: &Tensor,
    alpha: f32,
) -> Result<(Tensor, Tensor)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(PipelineError::Validation(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    let mut g = Graph::new();
    let fa = g.input(face_a);
    let fb = g.input(face_b);
    let (_, qa) = ckpt.model.face_query(&mut g, &ckpt.registry, fa, false)?;
    let (_, qb) = ckpt.model.face_query(&mut g, &ckpt.registry, fb, false)?;

    let blend = if alpha == 0.0 {
        qa
    } else if alpha == 1.0 {
        qb
    } else {
        let wa = g.scale(qa, 1.0 - alpha as f64);
        let wb = g.scale(qb, alpha as f64);
        g.add(wa, wb)?
    };
    let code = ckpt.model.mapped_code(&mut g, &ckpt.registry, blend, false)?;
    Ok((g.value_tensor(blend), g.value_tensor(code)))
}

pub fn interp(
    ckpt: &LoadedCheckpoint,
    face_a_path: &Path,
    face_b_path: &Path,
    alpha: f32,
    source_wav: Option<&Path>,
    out_dir: &Path,
) -> Result<(InterpOutput, Vec<PathBuf>)> {
    std::fs::create_dir_all(out_dir)?;
    let face_a = idfv::read_tensor(face_a_path)?;
    let face_b = idfv::read_tensor(face_b_path)?;
    let (blend_query, speaker_code) = blend_speaker_code(ckpt, &face_a, &face_b, alpha)?;

    let mut written = Vec::new();
    let code_path = out_dir.join("speaker_code.idfv");
    idfv::write_tensor(&code_path, &speaker_code)?;
    written.push(code_path);
    let blend_path = out_dir.join("blend_query.idfv");
    idfv::write_tensor(&blend_path, &blend_query)?;
    written.push(blend_path);

    let mel = if let Some(wav_path) = source_wav {
        let audio = prepare_wav(wav_path, &ckpt.cfg.stft)?;
        let mut g = Graph::new();
        let mel_in = g.input(&audio.mel);
        let z = ckpt
            .model
            .content_encoder
            .encode(&mut g, &ckpt.registry, mel_in, false)?;
        let vq = ckpt
            .model
            .content_encoder
            .quantize(&mut g, &ckpt.registry, z, false)?;
        let pitch = ckpt
            .model
            .pitch
            .embed(&mut g, &ckpt.registry, &audio.pitch, false)?;
        let code = g.input(&speaker_code);
        let mel_hat = ckpt
            .model
            .decoder
            .decode(&mut g, &ckpt.registry, code, vq.quantized, pitch, false)?;
        let mel_hat = g.value_tensor(mel_hat);

        let mel_path = out_dir.join("output_mel.idfv");
        idfv::write_tensor(&mel_path, &mel_hat)?;
        written.push(mel_path);
        let wav = griffin_lim(
            &tensor_to_mel(&mel_hat)?,
            &ckpt.cfg.stft,
            ckpt.cfg.griffin_lim_iters,
            ckpt.cfg.seed,
        )?;
        let out_wav = out_dir.join("output.wav");
        write_wav(&out_wav, &wav)?;
        written.push(out_wav);
        Some(mel_hat)
    } else {
        None
    };

    Ok((
        InterpOutput {
            blend_query,
            speaker_code,
            mel,
        },
        written,
    ))
}
