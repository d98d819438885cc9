//! Synthetic paired face/voice corpus.
//!
//! Each speaker owns a timbre anchor vector. Face frames are the anchor plus
//! per-frame Gaussian nuisance noise; audio is a harmonic stack whose base
//! frequency and spectral tilt are smooth deterministic functions of the
//! anchor, so the face-to-voice mapping is learnable and unseen anchors
//! interpolate.

use std::path::{Path, PathBuf};

use facevc_dsp::{write_wav, Waveform};
use facevc_nn::Tensor;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::RunConfig;
use crate::error::{PipelineError, Result};
use crate::idfv;

const FACE_NOISE_STD: f32 = 0.3;
const ANCHOR_MAX_COSINE: f64 = 0.5;
const VOCAB: [&str; 32] = [
    "ana", "bel", "cor", "dun", "eri", "fom", "gal", "hin", "iso", "jur", "kel", "lom", "mir",
    "nal", "oss", "pel", "qua", "rin", "sol", "tam", "ull", "ver", "wis", "xen", "yor", "zel",
    "ark", "byr", "cyn", "dor", "eth", "fyn",
];

#[derive(Debug, Clone)]
pub struct Utterance {
    pub speaker: usize,
    pub id: String,
    pub face_path: PathBuf,
    pub wav_path: PathBuf,
    pub transcript: String,
}

#[derive(Debug)]
pub struct Corpus {
    pub root: PathBuf,
    pub speakers: usize,
    pub utterances_per_speaker: usize,
    pub utterances: Vec<Utterance>,
    pub anchors: Tensor,
}

fn utterance_id(speaker: usize, index: usize) -> String {
    format!("utt{speaker:03}_{index:03}")
}

/// Random anchors redrawn until every pair is separated (cosine < 0.5).
fn draw_anchors<R: Rng>(rng: &mut R, k: usize, d: usize) -> Result<Vec<Vec<f32>>> {
    'attempt: for _ in 0..1000 {
        let anchors: Vec<Vec<f32>> = (0..k)
            .map(|_| (0..d).map(|_| StandardNormal.sample(rng)).collect())
            .collect();
        for i in 0..k {
            for j in (i + 1)..k {
                let dot: f64 = anchors[i]
                    .iter()
                    .zip(&anchors[j])
                    .map(|(&a, &b)| a as f64 * b as f64)
                    .sum();
                let ni: f64 = anchors[i].iter().map(|&a| (a as f64).powi(2)).sum::<f64>().sqrt();
                let nj: f64 = anchors[j].iter().map(|&a| (a as f64).powi(2)).sum::<f64>().sqrt();
                if dot / (ni * nj) >= ANCHOR_MAX_COSINE {
                    continue 'attempt;
                }
            }
        }
        return Ok(anchors);
    }
    Err(PipelineError::Validation(
        "could not draw separated timbre anchors; too many speakers for the face width".into(),
    ))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Smooth anchor-to-timbre maps shared by every speaker of a corpus.
struct TimbreMap {
    w_pitch: Vec<f64>,
    w_tilt: Vec<f64>,
}

impl TimbreMap {
    fn new<R: Rng>(rng: &mut R, d: usize) -> Self {
        let draw = |rng: &mut R| -> Vec<f64> {
            (0..d)
                .map(|_| <f64 as From<f32>>::from(StandardNormal.sample(rng)))
                .collect()
        };
        Self {
            w_pitch: draw(rng),
            w_tilt: draw(rng),
        }
    }

    fn project(w: &[f64], anchor: &[f32]) -> f64 {
        let dot: f64 = w.iter().zip(anchor).map(|(a, &b)| a * b as f64).sum();
        dot / (w.len() as f64).sqrt()
    }

    fn base_f0(&self, anchor: &[f32]) -> f64 {
        110.0 + 210.0 * sigmoid(1.5 * Self::project(&self.w_pitch, anchor))
    }

    fn tilt(&self, anchor: &[f32]) -> f64 {
        0.8 + 1.7 * sigmoid(1.5 * Self::project(&self.w_tilt, anchor))
    }
}

/// Harmonic stack with a smooth fade and short leading/trailing silence.
fn synth_utterance<R: Rng>(
    rng: &mut R,
    base_f0: f64,
    tilt: f64,
    seconds: f32,
    sample_rate: u32,
) -> Result<Waveform> {
    let sr = sample_rate as f64;
    let n = (seconds as f64 * sr) as usize;
    let silence = (n as f64 * 0.06) as usize;
    let fade = (sr * 0.01) as usize;

    let f0 = base_f0 * (1.0 + 0.03 * rng.gen_range(-1.0..1.0f64));
    let vibrato_phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let n_harmonics = ((6000.0 / f0).floor() as usize).clamp(3, 12);
    let phases: Vec<f64> = (0..n_harmonics)
        .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
        .collect();

    let voiced = n - 2 * silence;
    let mut samples = vec![0.0f32; n];
    let mut phase_acc = 0.0f64;
    for i in 0..voiced {
        let t = i as f64 / sr;
        let inst = f0 * (1.0 + 0.01 * (std::f64::consts::TAU * 4.0 * t + vibrato_phase).sin());
        phase_acc += std::f64::consts::TAU * inst / sr;
        let mut acc = 0.0f64;
        for (h, ph) in phases.iter().enumerate() {
            let k = (h + 1) as f64;
            acc += (phase_acc * k + ph).sin() / k.powf(tilt);
        }
        let env = if i < fade {
            i as f64 / fade as f64
        } else if i >= voiced - fade {
            (voiced - i) as f64 / fade as f64
        } else {
            1.0
        };
        samples[silence + i] = (acc * env) as f32;
    }
    let peak = samples.iter().fold(0.0f32, |m, &s| m.max(s.abs()));
    if peak > 0.0 {
        let scale = 0.65 / peak;
        samples.iter_mut().for_each(|s| *s *= scale);
    }
    Waveform::new(samples, sample_rate).map_err(Into::into)
}

/// Generates a corpus directory; byte-identical for identical seeds.
pub fn synth_corpus(dir: &Path, cfg: &RunConfig) -> Result<Corpus> {
    let (k, m) = (cfg.speakers, cfg.utterances_per_speaker);
    if k < 2 || m < 1 {
        return Err(PipelineError::Validation(format!(
            "corpus needs at least 2 speakers and 1 utterance each, got {k} and {m}"
        )));
    }
    std::fs::create_dir_all(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let anchors = draw_anchors(&mut rng, k, cfg.model.d_face)?;
    let timbre = TimbreMap::new(&mut rng, cfg.model.d_face);

    let anchor_tensor = Tensor::new(
        vec![k, cfg.model.d_face],
        anchors.iter().flatten().copied().collect(),
    )?;
    idfv::write_tensor(&dir.join("anchors.idfv"), &anchor_tensor)?;

    let mut labels = String::from("utt,speaker\n");
    let mut utterances = Vec::with_capacity(k * m);
    for (speaker, anchor) in anchors.iter().enumerate() {
        let base_f0 = timbre.base_f0(anchor);
        let tilt = timbre.tilt(anchor);
        for index in 0..m {
            let id = utterance_id(speaker, index);

            let mut face = Vec::with_capacity(cfg.face_frames * cfg.model.d_face);
            for _ in 0..cfg.face_frames {
                for &a in anchor {
                    let e: f32 = StandardNormal.sample(&mut rng);
                    face.push(a + FACE_NOISE_STD * e);
                }
            }
            let face_tensor = Tensor::new(vec![cfg.face_frames, cfg.model.d_face], face)?;
            let face_path = dir.join(format!("{id}.face.idfv"));
            idfv::write_tensor(&face_path, &face_tensor)?;

            let wav = synth_utterance(
                &mut rng,
                base_f0,
                tilt,
                cfg.utterance_seconds,
                cfg.stft.sample_rate,
            )?;
            let wav_path = dir.join(format!("{id}.wav"));
            write_wav(&wav_path, &wav)?;

            let n_words = rng.gen_range(3..=8);
            let transcript: Vec<&str> = (0..n_words)
                .map(|_| VOCAB[rng.gen_range(0..VOCAB.len())])
                .collect();
            let transcript = transcript.join(" ");
            std::fs::write(dir.join(format!("{id}.txt")), format!("{transcript}\n"))?;

            labels.push_str(&format!("{id},{speaker}\n"));
            utterances.push(Utterance {
                speaker,
                id,
                face_path,
                wav_path,
                transcript,
            });
        }
    }
    std::fs::write(dir.join("labels.csv"), labels)?;
    std::fs::write(
        dir.join("meta.txt"),
        format!(
            "speakers={k}\nutterances_per_speaker={m}\nface_frames={}\nseed={}\nd_face={}\nsample_rate={}\n",
            cfg.face_frames, cfg.seed, cfg.model.d_face, cfg.stft.sample_rate
        ),
    )?;

    Ok(Corpus {
        root: dir.to_path_buf(),
        speakers: k,
        utterances_per_speaker: m,
        utterances,
        anchors: anchor_tensor,
    })
}

/// Loads and validates a corpus directory.
pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    let meta = std::fs::read_to_string(dir.join("meta.txt"))
        .map_err(|e| PipelineError::Io(format!("{}: {e}", dir.join("meta.txt").display())))?;
    let mut speakers = 0usize;
    let mut per_speaker = 0usize;
    for line in meta.lines() {
        if let Some((k, v)) = line.split_once('=') {
            match k {
                "speakers" => {
                    speakers = v.parse().map_err(|_| {
                        PipelineError::Validation(format!("bad speaker count {v:?}"))
                    })?
                }
                "utterances_per_speaker" => {
                    per_speaker = v.parse().map_err(|_| {
                        PipelineError::Validation(format!("bad utterance count {v:?}"))
                    })?
                }
                _ => {}
            }
        }
    }
    if speakers == 0 || per_speaker == 0 {
        return Err(PipelineError::Validation(
            "meta.txt lacks speaker or utterance counts".into(),
        ));
    }

    let labels = std::fs::read_to_string(dir.join("labels.csv"))
        .map_err(|e| PipelineError::Io(format!("{}: {e}", dir.join("labels.csv").display())))?;
    let mut utterances = Vec::new();
    for line in labels.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let (id, spk) = line.split_once(',').ok_or_else(|| {
            PipelineError::Validation(format!("bad labels.csv line {line:?}"))
        })?;
        let speaker: usize = spk
            .trim()
            .parse()
            .map_err(|_| PipelineError::Validation(format!("bad speaker id {spk:?}")))?;
        if speaker >= speakers {
            return Err(PipelineError::Validation(format!(
                "speaker id {speaker} out of range for {speakers} speakers"
            )));
        }
        let face_path = dir.join(format!("{id}.face.idfv"));
        let wav_path = dir.join(format!("{id}.wav"));
        for p in [&face_path, &wav_path] {
            if !p.exists() {
                return Err(PipelineError::Io(format!("missing corpus file {}", p.display())));
            }
        }
        let transcript = std::fs::read_to_string(dir.join(format!("{id}.txt")))
            .map(|s| s.trim().to_string())
            .unwrap_or_default();
        utterances.push(Utterance {
            speaker,
            id: id.to_string(),
            face_path,
            wav_path,
            transcript,
        });
    }
    if utterances.len() != speakers * per_speaker {
        return Err(PipelineError::Validation(format!(
            "expected {} utterances, labels list {}",
            speakers * per_speaker,
            utterances.len()
        )));
    }
    let anchors = idfv::read_tensor(&dir.join("anchors.idfv"))?;
    Ok(Corpus {
        root: dir.to_path_buf(),
        speakers,
        utterances_per_speaker: per_speaker,
        utterances,
        anchors,
    })
}

/// Speaker-disjoint split: the last max(2, ~20%) speakers are held out for
/// zero-shot evaluation.
pub fn speaker_split(total: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let held_out = ((total + 4) / 5).max(2);
    if total < held_out + 2 {
        return Err(PipelineError::Validation(format!(
            "{total} speakers leave fewer than 2 for training after holding out {held_out}"
        )));
    }
    let train: Vec<usize> = (0..total - held_out).collect();
    let eval: Vec<usize> = (total - held_out..total).collect();
    Ok((train, eval))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> RunConfig {
        RunConfig {
            speakers: 3,
            utterances_per_speaker: 2,
            face_frames: 4,
            utterance_seconds: 0.2,
            ..Default::default()
        }
    }

    #[test]
    fn counts_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_cfg();
        let corpus = synth_corpus(dir.path(), &cfg).unwrap();
        assert_eq!(corpus.utterances.len(), 6);
        let loaded = load_corpus(dir.path()).unwrap();
        assert_eq!(loaded.utterances.len(), 6);
        assert_eq!(loaded.speakers, 3);
        assert_eq!(loaded.anchors.shape(), &[3, cfg.model.d_face]);
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = small_cfg();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        synth_corpus(d1.path(), &cfg).unwrap();
        synth_corpus(d2.path(), &cfg).unwrap();
        let mut names: Vec<_> = std::fs::read_dir(d1.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert!(!names.is_empty());
        for name in names {
            let a = std::fs::read(d1.path().join(&name)).unwrap();
            let b = std::fs::read(d2.path().join(&name)).unwrap();
            assert_eq!(a, b, "{name:?} differs");
        }
    }

    #[test]
    fn anchors_are_separated() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            speakers: 16,
            utterances_per_speaker: 1,
            utterance_seconds: 0.15,
            ..Default::default()
        };
        let corpus = synth_corpus(dir.path(), &cfg).unwrap();
        let d = cfg.model.d_face;
        let a = corpus.anchors.data();
        for i in 0..16 {
            for j in (i + 1)..16 {
                let dot: f64 = (0..d)
                    .map(|c| a[i * d + c] as f64 * a[j * d + c] as f64)
                    .sum();
                let ni: f64 = (0..d).map(|c| (a[i * d + c] as f64).powi(2)).sum::<f64>().sqrt();
                let nj: f64 = (0..d).map(|c| (a[j * d + c] as f64).powi(2)).sum::<f64>().sqrt();
                assert!(dot / (ni * nj) < ANCHOR_MAX_COSINE, "pair ({i}, {j})");
            }
        }
    }

    #[test]
    fn invalid_counts_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            speakers: 1,
            ..small_cfg()
        };
        assert!(synth_corpus(dir.path(), &cfg).is_err());
    }

    #[test]
    fn split_holds_out_at_least_two_speakers() {
        let (train, eval) = speaker_split(4).unwrap();
        assert_eq!(train, vec![0, 1]);
        assert_eq!(eval, vec![2, 3]);
        let (train, eval) = speaker_split(10).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(eval.len(), 2);
        assert!(speaker_split(3).is_err());
    }
}
