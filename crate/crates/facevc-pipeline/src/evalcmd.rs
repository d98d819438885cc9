//! Held-out evaluation: convert a fixed source utterance with every held-out
//! face, re-embed the generated mels with the frozen speaker encoder, and
//! score similarity/consistency/diversity. Embeddings are exported alongside
//! the report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use facevc_metrics::{sec, secs, sed, EmbeddingSet};
use facevc_nn::{Graph, Tensor};

use crate::checkpoint::LoadedCheckpoint;
use crate::corpus::{load_corpus, speaker_split};
use crate::error::{PipelineError, Result};
use crate::features::prepare_wav;
use crate::idfv;
use crate::infer::generate_mel;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub secs: f64,
    pub sec: f64,
    pub sed: f64,
    pub n_utterances: usize,
    pub n_speakers: usize,
}

impl EvalReport {
    /// Flat key -> number text form; keys are the report schema.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "secs {}", self.secs);
        let _ = writeln!(s, "sec {}", self.sec);
        let _ = writeln!(s, "sed {}", self.sed);
        let _ = writeln!(s, "n_utterances {}", self.n_utterances);
        let _ = writeln!(s, "n_speakers {}", self.n_speakers);
        s
    }
}

/// Frozen speaker-encoder embedding of a mel.
fn embed_mel(ckpt: &LoadedCheckpoint, mel: &Tensor) -> Result<Vec<f32>> {
    let mut g = Graph::new();
    let mv = g.input(mel);
    let (code, _) = ckpt
        .model
        .speaker_encoder
        .forward_mel(&mut g, &ckpt.registry, mv, false)?;
    Ok(g.value_f32(code))
}

pub fn evaluate_corpus(
    ckpt: &LoadedCheckpoint,
    corpus_dir: &Path,
    out_dir: &Path,
) -> Result<EvalReport> {
    std::fs::create_dir_all(out_dir)?;
    let corpus = load_corpus(corpus_dir)?;
    let (train_speakers, eval_speakers) = speaker_split(corpus.speakers)?;
    if eval_speakers.len() < 2 {
        return Err(PipelineError::Validation(
            "evaluation needs at least 2 held-out speakers".into(),
        ));
    }

    // Content and pitch come from one fixed training-side utterance, so the
    // generated set varies only through the target faces.
    let source = corpus
        .utterances
        .iter()
        .find(|u| u.speaker == train_speakers[0])
        .ok_or_else(|| PipelineError::Validation("no source utterance in the train split".into()))?;
    let source_audio = prepare_wav(&source.wav_path, &ckpt.cfg.stft)?;

    let mut gen_vectors = Vec::new();
    let mut gen_speakers = Vec::new();
    let mut ref_vectors = Vec::new();
    let mut ref_speakers = Vec::new();

    for utt in &corpus.utterances {
        if !eval_speakers.contains(&utt.speaker) {
            continue;
        }
        let face = idfv::read_tensor(&utt.face_path)?;
        let mel_hat = generate_mel(ckpt, &face, &source_audio.mel, &source_audio.pitch)?;
        gen_vectors.push(embed_mel(ckpt, &mel_hat)?);
        gen_speakers.push(utt.speaker);

        let real_audio = prepare_wav(&utt.wav_path, &ckpt.cfg.stft)?;
        ref_vectors.push(embed_mel(ckpt, &real_audio.mel)?);
        ref_speakers.push(utt.speaker);
    }

    let n_utterances = gen_vectors.len();
    let gen_set = EmbeddingSet::new(gen_vectors.clone(), gen_speakers.clone())?;
    let ref_set = EmbeddingSet::new(ref_vectors.clone(), ref_speakers.clone())?;
    let report = EvalReport {
        secs: secs(&gen_set, &ref_set)?,
        sec: sec(&gen_set)?,
        sed: sed(&gen_set)?,
        n_utterances,
        n_speakers: eval_speakers.len(),
    };

    write_outputs(out_dir, &report, &gen_set, &ref_set)?;
    Ok(report)
}

/// Direct-embedding entry point: IDFV matrices plus a set,row,speaker CSV.
pub fn evaluate_embeddings(
    gen_path: &Path,
    ref_path: &Path,
    labels_path: &Path,
    out_dir: &Path,
) -> Result<EvalReport> {
    std::fs::create_dir_all(out_dir)?;
    let gen = idfv::read_tensor(gen_path)?;
    let reference = idfv::read_tensor(ref_path)?;
    let text = std::fs::read_to_string(labels_path)
        .map_err(|e| PipelineError::Io(format!("{}: {e}", labels_path.display())))?;

    let (gn, gd) = gen.dims2();
    let (rn, rd) = reference.dims2();
    if gd != rd {
        return Err(PipelineError::Validation(format!(
            "embedding widths differ: {gd} vs {rd}"
        )));
    }
    let mut gen_speakers = vec![None; gn];
    let mut ref_speakers = vec![None; rn];
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(PipelineError::Validation(format!(
                "bad labels line {line:?}, expected set,row,speaker"
            )));
        }
        let row: usize = fields[1].trim().parse().map_err(|_| {
            PipelineError::Validation(format!("bad row index {:?}", fields[1]))
        })?;
        let speaker: usize = fields[2].trim().parse().map_err(|_| {
            PipelineError::Validation(format!("bad speaker id {:?}", fields[2]))
        })?;
        let slot = match fields[0].trim() {
            "gen" => gen_speakers.get_mut(row),
            "ref" => ref_speakers.get_mut(row),
            other => {
                return Err(PipelineError::Validation(format!(
                    "bad set {other:?}, expected gen or ref"
                )))
            }
        };
        *slot.ok_or_else(|| {
            PipelineError::Validation(format!("row {row} out of range in labels file"))
        })? = Some(speaker);
    }
    let unwrap_all = |v: Vec<Option<usize>>, what: &str| -> Result<Vec<usize>> {
        v.into_iter()
            .enumerate()
            .map(|(i, s)| {
                s.ok_or_else(|| {
                    PipelineError::Validation(format!("{what} row {i} has no speaker label"))
                })
            })
            .collect()
    };
    let gen_speakers = unwrap_all(gen_speakers, "gen")?;
    let ref_speakers = unwrap_all(ref_speakers, "ref")?;

    let rows = |t: &Tensor, n: usize, d: usize| -> Vec<Vec<f32>> {
        (0..n).map(|i| t.data()[i * d..(i + 1) * d].to_vec()).collect()
    };
    let gen_set = EmbeddingSet::new(rows(&gen, gn, gd), gen_speakers)?;
    let ref_set = EmbeddingSet::new(rows(&reference, rn, rd), ref_speakers)?;

    let mut speakers = gen_set.speakers().to_vec();
    speakers.sort_unstable();
    speakers.dedup();
    let report = EvalReport {
        secs: secs(&gen_set, &ref_set)?,
        sec: sec(&gen_set)?,
        sed: sed(&gen_set)?,
        n_utterances: gn,
        n_speakers: speakers.len(),
    };
    write_outputs(out_dir, &report, &gen_set, &ref_set)?;
    Ok(report)
}

fn write_outputs(
    out_dir: &Path,
    report: &EvalReport,
    gen_set: &EmbeddingSet,
    ref_set: &EmbeddingSet,
) -> Result<()> {
    std::fs::write(out_dir.join("report.txt"), report.serialize())?;

    let to_tensor = |set: &EmbeddingSet| -> Result<Tensor> {
        Tensor::new(
            vec![set.len(), set.dim()],
            set.vectors().iter().flatten().copied().collect(),
        )
        .map_err(Into::into)
    };
    idfv::write_tensor(&out_dir.join("gen_embeddings.idfv"), &to_tensor(gen_set)?)?;
    idfv::write_tensor(&out_dir.join("ref_embeddings.idfv"), &to_tensor(ref_set)?)?;

    let mut labels = String::from("set,row,speaker\n");
    for (i, &s) in gen_set.speakers().iter().enumerate() {
        let _ = writeln!(labels, "gen,{i},{s}");
    }
    for (i, &s) in ref_set.speakers().iter().enumerate() {
        let _ = writeln!(labels, "ref,{i},{s}");
    }
    std::fs::write(out_dir.join("labels.csv"), labels)?;
    Ok(())
}

pub fn report_path(out_dir: &Path) -> PathBuf {
    out_dir.join("report.txt")
}
