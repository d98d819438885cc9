//! Training: alternating density-network fitting and one combined-objective
//! step per batch, with per-epoch checkpoints and a per-step loss log.

use std::path::{Path, PathBuf};

use facevc_losses::{
    club_mi_upper, contrastive_loss, fv_mapping_loss, id_supervision_loss, qnet_nll, recon_loss,
    total_loss, LossParts, SpeakerLabelBatch, INTER_SPEAKER_MARGIN,
};
use facevc_nn::{Graph, Tensor, ValueId};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint;
use crate::config::RunConfig;
use crate::corpus::{load_corpus, speaker_split};
use crate::error::{PipelineError, Result};
use crate::features::prepare_wav;
use crate::idfv;
use crate::optimizer::Sgd;

pub const CSV_HEADER: &str =
    "step,reconstruction,contrastive,mutual_information,id_face,id_speech,face_voice,total";

struct Sample {
    label: usize,
    face: Tensor,
    mel: Tensor,
    pitch: Vec<facevc_model::PitchPoint>,
}

pub struct TrainReport {
    pub steps: usize,
    pub epoch_mean_totals: Vec<f64>,
    pub checkpoint_dir: PathBuf,
    pub csv_path: PathBuf,
}

fn is_qnet(name: &str) -> bool {
    name.starts_with("qnet.")
}

pub fn train(cfg: &RunConfig, corpus_dir: &Path, out_dir: &Path) -> Result<TrainReport> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let corpus = load_corpus(corpus_dir)?;
    if corpus.anchors.dims2().1 != cfg.model.d_face {
        return Err(PipelineError::Validation(format!(
            "corpus face width {} does not match configured d_face {}",
            corpus.anchors.dims2().1,
            cfg.model.d_face
        )));
    }
    let (train_speakers, _) = speaker_split(corpus.speakers)?;
    let n_classes = train_speakers.len();

    let mut samples = Vec::new();
    for utt in &corpus.utterances {
        let Some(label) = train_speakers.iter().position(|&s| s == utt.speaker) else {
            continue;
        };
        let face = idfv::read_tensor(&utt.face_path)?;
        let audio = prepare_wav(&utt.wav_path, &cfg.stft)?;
        let frames = audio.mel.dims2().0;
        if frames <= cfg.model.cpc_horizon {
            return Err(PipelineError::Validation(format!(
                "utterance {} is too short ({frames} frames) for the predictive horizon",
                utt.id
            )));
        }
        samples.push(Sample {
            label,
            face,
            mel: audio.mel,
            pitch: audio.pitch,
        });
    }
    if samples.is_empty() {
        return Err(PipelineError::Validation("no training utterances".into()));
    }

    let (mut reg, model, qnet) = checkpoint::build_model(cfg, n_classes, cfg.seed)?;

    // Start the decoder output at the corpus mean frame; the early steps
    // then go into spectral structure instead of the static field.
    let mut mean_frame = vec![0.0f64; cfg.model.d_mel];
    let mut frame_count = 0usize;
    for sample in &samples {
        let (frames, bands) = sample.mel.dims2();
        for t in 0..frames {
            for b in 0..bands {
                mean_frame[b] += sample.mel.data()[t * bands + b] as f64;
            }
        }
        frame_count += frames;
    }
    let mean_frame: Vec<f32> = mean_frame
        .iter()
        .map(|v| (v / frame_count as f64) as f32)
        .collect();
    reg.load_values(
        "decoder.l3.bias",
        &Tensor::new(vec![cfg.model.d_mel], mean_frame)?,
    )?;

    let mut main_opt = Sgd::new(cfg.learning_rate, cfg.momentum, cfg.grad_clip);
    let mut q_opt = Sgd::new(cfg.q_learning_rate, cfg.momentum, cfg.q_grad_clip);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5841_77a3));

    let ckpt_dir = out_dir.join("checkpoint");
    let csv_path = out_dir.join("losses.csv");
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut step = 0usize;
    let mut epoch_mean_totals = Vec::with_capacity(cfg.epochs);

    checkpoint::save(&ckpt_dir, &reg, cfg, n_classes)?;

    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_total = 0.0f64;
        let mut epoch_batches = 0usize;

        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            let labels = SpeakerLabelBatch::new(
                batch.iter().map(|s| s.label).collect(),
                n_classes,
            )?;

            // Snapshot the current embeddings, then fit the density network
            // on them before the main objective sees the MI bound.
            let (spk_snapshot, con_snapshot) = embedding_snapshot(&reg, &model, cfg, &batch)?;
            for _ in 0..cfg.q_steps {
                let mut g = Graph::new();
                let spk = g.input(&spk_snapshot);
                let con = g.input(&con_snapshot);
                let nll = qnet_nll(&mut g, &reg, spk, con, &qnet, true)?;
                g.backward(nll)?;
                reg.zero_grads();
                g.accumulate_into(&mut reg)?;
                q_opt.step(&mut reg, is_qnet);
            }

            let values = main_step(
                &mut reg,
                &model,
                &qnet,
                cfg,
                &batch,
                &labels,
                &mut main_opt,
            )?;
            epoch_total += values[6];
            epoch_batches += 1;
            csv.push_str(&format!(
                "{step},{},{},{},{},{},{},{}\n",
                values[0], values[1], values[2], values[3], values[4], values[5], values[6]
            ));
            step += 1;
        }

        if epoch_batches > 0 {
            epoch_mean_totals.push(epoch_total / epoch_batches as f64);
        }
        checkpoint::save(&ckpt_dir, &reg, cfg, n_classes)?;
    }

    std::fs::write(&csv_path, csv)?;
    Ok(TrainReport {
        steps: step,
        epoch_mean_totals,
        checkpoint_dir: ckpt_dir,
        csv_path,
    })
}

/// Frozen forward pass producing per-sample speaker codes and pooled
/// (straight-through) content codes as plain tensors.
fn embedding_snapshot(
    reg: &facevc_nn::ParameterRegistry,
    model: &facevc_model::FaceVoiceModel,
    _cfg: &RunConfig,
    batch: &[&Sample],
) -> Result<(Tensor, Tensor)> {
    let mut g = Graph::new();
    let mut spk_rows = Vec::with_capacity(batch.len());
    let mut con_rows = Vec::with_capacity(batch.len());
    for sample in batch {
        let mel = g.input(&sample.mel);
        let (spk, _) = model.speaker_encoder.forward_mel(&mut g, reg, mel, false)?;
        let z = model.content_encoder.encode(&mut g, reg, mel, false)?;
        let vq = model.content_encoder.quantize(&mut g, reg, z, false)?;
        let pooled = g.mean_over_rows(vq.quantized);
        spk_rows.push(spk);
        con_rows.push(pooled);
    }
    let spk = g.concat_rows(&spk_rows)?;
    let con = g.concat_rows(&con_rows)?;
    Ok((g.value_tensor(spk), g.value_tensor(con)))
}

/// Builds the full differentiable objective for one batch, steps the main
/// parameters, and returns the logged loss values
/// [rec, con, mi, id_f, id_s, fv, total].
fn main_step(
    reg: &mut facevc_nn::ParameterRegistry,
    model: &facevc_model::FaceVoiceModel,
    qnet: &facevc_losses::VariationalNet,
    cfg: &RunConfig,
    batch: &[&Sample],
    labels: &SpeakerLabelBatch,
    opt: &mut Sgd,
) -> Result<[f64; 7]> {
    let mut g = Graph::new();
    let mut query_rows = Vec::new();
    let mut mapped_rows = Vec::new();
    let mut spk_rows = Vec::new();
    let mut con_rows = Vec::new();
    let mut rec_terms = Vec::new();
    let mut cpc_terms = Vec::new();
    let mut commit_terms = Vec::new();
    let mut codebook_terms = Vec::new();

    for sample in batch {
        let mel = g.input(&sample.mel);
        let face = g.input(&sample.face);

        let (query, query_norm) = model.face_query(&mut g, reg, face, true)?;
        let mapped = model.memory.map(&mut g, reg, query_norm, true)?;
        let (spk, _) = model.speaker_encoder.forward_mel(&mut g, reg, mel, true)?;

        let z = model.content_encoder.encode(&mut g, reg, mel, true)?;
        let vq = model.content_encoder.quantize(&mut g, reg, z, true)?;
        let cpc = model.content_encoder.predictive_loss(&mut g, reg, z, true)?;
        let pooled_con = g.mean_over_rows(vq.quantized);

        let pitch = model.pitch.embed(&mut g, reg, &sample.pitch, true)?;
        let mel_hat = model
            .decoder
            .decode(&mut g, reg, spk, vq.quantized, pitch, true)?;
        let rec = recon_loss(&mut g, mel, mel_hat)?;

        query_rows.push(query);
        mapped_rows.push(mapped);
        spk_rows.push(spk);
        con_rows.push(pooled_con);
        rec_terms.push(rec);
        cpc_terms.push(cpc);
        commit_terms.push(vq.commitment);
        codebook_terms.push(vq.codebook_loss);
    }

    let query_batch = g.concat_rows(&query_rows)?;
    let mapped_batch = g.concat_rows(&mapped_rows)?;
    let spk_batch = g.concat_rows(&spk_rows)?;
    let con_batch = g.concat_rows(&con_rows)?;

    let mean_of = |g: &mut Graph, terms: &[ValueId]| -> Result<ValueId> {
        let stacked = g.concat_cols(terms)?;
        Ok(g.mean_all(stacked))
    };
    let rec_mean = mean_of(&mut g, &rec_terms)?;
    let cpc_mean = mean_of(&mut g, &cpc_terms)?;
    let commit_mean = mean_of(&mut g, &commit_terms)?;
    let codebook_mean = mean_of(&mut g, &codebook_terms)?;

    let parts = LossParts {
        reconstruction: rec_mean,
        contrastive: contrastive_loss(&mut g, query_batch, spk_batch, labels, cfg.tau)?,
        mutual_information: club_mi_upper(&mut g, reg, spk_batch, con_batch, qnet, false)?,
        id_face: id_supervision_loss(&mut g, reg, query_batch, &model.face_head, labels, true)?,
        id_speech: id_supervision_loss(&mut g, reg, spk_batch, &model.speech_head, labels, true)?,
        face_voice: fv_mapping_loss(&mut g, mapped_batch, spk_batch, labels, INTER_SPEAKER_MARGIN)?,
    };
    let total = total_loss(&mut g, &parts, &cfg.weights)?;

    // Quantizer and predictive terms ride along on the same step.
    let cpc_w = g.scale(cpc_mean, cfg.cpc_weight as f64);
    let commit_w = g.scale(commit_mean, cfg.commitment_weight as f64);
    let codebook_w = g.scale(codebook_mean, cfg.codebook_weight as f64);
    let mut objective = g.add(total, cpc_w)?;
    objective = g.add(objective, commit_w)?;
    objective = g.add(objective, codebook_w)?;

    let objective_value = g.scalar_value(objective)?;
    if !objective_value.is_finite() {
        return Err(PipelineError::Numeric(format!(
            "training objective is non-finite: {objective_value}"
        )));
    }

    let part_values = parts.values(&g)?;
    let total_value = g.scalar_value(total)?;

    g.backward(objective)?;
    reg.zero_grads();
    g.accumulate_into(reg)?;
    opt.step(reg, |name| !is_qnet(name));

    Ok([
        part_values[0],
        part_values[1],
        part_values[2],
        part_values[3],
        part_values[4],
        part_values[5],
        total_value,
    ])
}
