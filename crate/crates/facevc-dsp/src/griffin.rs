//! Waveform synthesis from a mel spectrogram: approximate filterbank
//! inversion followed by iterative phase reconstruction.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{DspError, Result};
use crate::mel::MelFilterbank;
use crate::stft::{istft, reanalyze};
use crate::types::{MelSpectrogram, StftConfig, Waveform};

const POLISH_STEPS: usize = 120;
const MAX_ATOMS: usize = 64;
/// Candidate tone positions per FFT bin in the pursuit grid.
const GRID_PER_BIN: usize = 2;
/// Kernel support kept around a tone, in bins each side.
const KERNEL_RADIUS: usize = 4;

/// Triangle rows reduced to their nonzero spans; each bin is covered by at
/// most a couple of bands, so the refinement loop is effectively linear in
/// the bin count.
struct SparseBank {
    spans: Vec<(usize, Vec<f64>)>,
    n_bins: usize,
}

impl SparseBank {
    fn new(fb: &MelFilterbank) -> Self {
        let spans = (0..fb.n_mels)
            .map(|m| {
                let row = fb.row(m);
                let first = row.iter().position(|&w| w > 0.0).unwrap_or(0);
                let last = row.iter().rposition(|&w| w > 0.0).unwrap_or(0);
                (first, row[first..=last].to_vec())
            })
            .collect();
        Self {
            spans,
            n_bins: fb.n_bins,
        }
    }

    fn project(&self, mag: &[f64], out: &mut [f64]) {
        for (m, (start, weights)) in self.spans.iter().enumerate() {
            out[m] = weights
                .iter()
                .zip(&mag[*start..])
                .map(|(w, x)| w * x)
                .sum();
        }
    }
}

/// One windowed-tone atom: its magnitude footprint over FFT bins and its
/// image through the filterbank.
struct ToneAtom {
    bin_start: usize,
    kernel: Vec<f64>,
    mel_image: Vec<f64>,
    mel_norm_sq: f64,
}

/// Magnitude footprints of pure tones on the analysis grid, sampled finer
/// than the bin spacing. Computed numerically from the actual window so the
/// pursuit matches the forward transform exactly.
fn tone_atoms(cfg: &StftConfig, fb: &MelFilterbank) -> Vec<ToneAtom> {
    use rustfft::num_complex::Complex;
    use rustfft::FftPlanner;

    let window = crate::stft::hann_window(cfg.win_length);
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(cfg.fft_size);
    let n_bins = cfg.n_freq_bins();
    let n_candidates = (n_bins - 1) * GRID_PER_BIN + 1;

    let mut atoms = Vec::with_capacity(n_candidates);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];
    for c in 0..n_candidates {
        let bin_pos = c as f64 / GRID_PER_BIN as f64;
        let omega = 2.0 * std::f64::consts::PI * bin_pos / cfg.fft_size as f64;
        for (i, slot) in buf.iter_mut().enumerate() {
            let x = if i < cfg.win_length {
                (omega * i as f64).cos() * window[i]
            } else {
                0.0
            };
            *slot = Complex::new(x, 0.0);
        }
        fft.process(&mut buf);

        let center = bin_pos.round() as usize;
        let bin_start = center.saturating_sub(KERNEL_RADIUS);
        let bin_end = (center + KERNEL_RADIUS).min(n_bins - 1);
        let kernel: Vec<f64> = (bin_start..=bin_end).map(|k| buf[k].norm()).collect();

        let mut mel_image = vec![0.0f64; fb.n_mels];
        for m in 0..fb.n_mels {
            let row = fb.row(m);
            mel_image[m] = kernel
                .iter()
                .enumerate()
                .map(|(i, &v)| row[bin_start + i] * v)
                .sum();
        }
        let mel_norm_sq: f64 = mel_image.iter().map(|v| v * v).sum();
        atoms.push(ToneAtom {
            bin_start,
            kernel,
            mel_image,
            mel_norm_sq,
        });
    }
    atoms
}

/// Nonnegative magnitude estimate per frame: matching pursuit over windowed
/// tone atoms captures the harmonic structure, a transpose spread absorbs
/// the broadband remainder, and multiplicative least-squares updates
/// x <- x * (W^T y) / (W^T W x) polish the fit.
fn mel_to_magnitude(mel_amp: &[f64], bank: &SparseBank, atoms: &[ToneAtom]) -> Vec<f64> {
    let n_bins = bank.n_bins;
    let mut mag = vec![0.0f64; n_bins];
    let mut residual = mel_amp.to_vec();
    let target_energy: f64 = mel_amp.iter().map(|v| v * v).sum();

    for _ in 0..MAX_ATOMS {
        let mut best: Option<(usize, f64)> = None;
        for (c, atom) in atoms.iter().enumerate() {
            if atom.mel_norm_sq < 1e-24 {
                continue;
            }
            let dot: f64 = atom
                .mel_image
                .iter()
                .zip(&residual)
                .map(|(a, r)| a * r)
                .sum();
            if dot <= 0.0 {
                continue;
            }
            let gain = dot * dot / atom.mel_norm_sq;
            if best.map(|(_, g)| gain > g).unwrap_or(true) {
                best = Some((c, gain));
            }
        }
        let Some((c, gain)) = best else { break };
        if gain < 1e-6 * target_energy.max(1e-24) {
            break;
        }
        let atom = &atoms[c];
        let coef = atom
            .mel_image
            .iter()
            .zip(&residual)
            .map(|(a, r)| a * r)
            .sum::<f64>()
            / atom.mel_norm_sq;
        for (m, a) in atom.mel_image.iter().enumerate() {
            residual[m] -= coef * a;
        }
        for (i, &v) in atom.kernel.iter().enumerate() {
            mag[atom.bin_start + i] += coef * v;
        }
    }

    // Spread whatever positive residual remains across its bands.
    let mut col_norm = vec![0.0f64; n_bins];
    for (start, weights) in &bank.spans {
        for (i, &w) in weights.iter().enumerate() {
            col_norm[start + i] += w;
        }
    }
    for ((start, weights), &r) in bank.spans.iter().zip(&residual) {
        if r <= 0.0 {
            continue;
        }
        for (i, &w) in weights.iter().enumerate() {
            mag[start + i] += w * r / col_norm[start + i].max(1e-8);
        }
    }

    // Multiplicative polish toward M mag == mel_amp; zero bins stay zero.
    let mut num = vec![0.0f64; n_bins];
    for ((start, weights), &amp) in bank.spans.iter().zip(mel_amp) {
        for (i, &w) in weights.iter().enumerate() {
            num[start + i] += w * amp;
        }
    }
    let mut reproj = vec![0.0f64; bank.spans.len()];
    let mut den = vec![0.0f64; n_bins];
    for _ in 0..POLISH_STEPS {
        bank.project(&mag, &mut reproj);
        den.iter_mut().for_each(|d| *d = 0.0);
        for ((start, weights), &r) in bank.spans.iter().zip(&reproj) {
            for (i, &w) in weights.iter().enumerate() {
                den[start + i] += w * r;
            }
        }
        for k in 0..n_bins {
            if mag[k] > 0.0 {
                mag[k] *= num[k] / den[k].max(1e-12);
            }
        }
    }
    mag
}

/// Iterative phase reconstruction with seeded random initial phases. The
/// same mel, config, iteration count and seed always produce bit-identical
/// audio.
pub fn griffin_lim(
    mel: &MelSpectrogram,
    cfg: &StftConfig,
    iters: usize,
    seed: u64,
) -> Result<Waveform> {
    if iters == 0 {
        return Err(DspError::Validation(
            "phase reconstruction needs at least one iteration".into(),
        ));
    }
    if mel.bands() != cfg.n_mels {
        return Err(DspError::Validation(format!(
            "mel has {} bands but the config expects {}",
            mel.bands(),
            cfg.n_mels
        )));
    }
    let fb = MelFilterbank::new(cfg)?;
    let bank = SparseBank::new(&fb);
    let atoms = tone_atoms(cfg, &fb);

    let magnitudes: Vec<Vec<f64>> = (0..mel.frames())
        .map(|t| {
            let amp: Vec<f64> = mel.frame(t).iter().map(|&v| (v as f64).exp()).collect();
            mel_to_magnitude(&amp, &bank, &atoms)
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phases: Vec<Vec<f64>> = magnitudes
        .iter()
        .map(|row| {
            row.iter()
                .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
                .collect()
        })
        .collect();

    let mut samples = istft(&magnitudes, &phases, cfg)?;
    for _ in 0..iters {
        let spec = reanalyze(&samples, cfg)?;
        phases = spec.phases();
        // Reanalysis can drop trailing frames when lengths do not divide
        // evenly; keep phase rows for every magnitude frame.
        while phases.len() < magnitudes.len() {
            phases.push(vec![0.0; cfg.n_freq_bins()]);
        }
        phases.truncate(magnitudes.len());
        samples = istft(&magnitudes, &phases, cfg)?;
    }
    Waveform::peak_normalized(samples, cfg.sample_rate)
}
