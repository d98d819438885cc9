//! Hann-windowed short-time Fourier analysis and overlap-add synthesis.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::Result;
use crate::types::StftConfig;

/// Periodic Hann window (sums to a constant under 75% overlap).
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos()))
        .collect()
}

/// Complex spectra, one row of `n_freq_bins` per frame.
pub struct Spectrogram {
    pub frames: Vec<Vec<Complex<f64>>>,
    pub n_bins: usize,
}

impl Spectrogram {
    pub fn magnitudes(&self) -> Vec<Vec<f64>> {
        self.frames
            .iter()
            .map(|row| row.iter().map(|c| c.norm()).collect())
            .collect()
    }

    pub fn phases(&self) -> Vec<Vec<f64>> {
        self.frames
            .iter()
            .map(|row| row.iter().map(|c| c.arg()).collect())
            .collect()
    }
}

/// Windowed forward transform; keeps bins 0..=fft/2.
pub fn stft(samples: &[f32], cfg: &StftConfig) -> Result<Spectrogram> {
    cfg.validate()?;
    let n_frames = cfg.frame_count(samples.len())?;
    let window = hann_window(cfg.win_length);
    let n_bins = cfg.n_freq_bins();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(cfg.fft_size);
    let mut frames = Vec::with_capacity(n_frames);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];

    for t in 0..n_frames {
        let start = t * cfg.hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            let x = if i < cfg.win_length {
                samples[start + i] as f64 * window[i]
            } else {
                0.0
            };
            *slot = Complex::new(x, 0.0);
        }
        fft.process(&mut buf);
        frames.push(buf[..n_bins].to_vec());
    }
    Ok(Spectrogram {
        frames,
        n_bins,
    })
}

/// Overlap-add inverse from magnitude and phase, normalized by the summed
/// squared synthesis window.
pub fn istft(
    magnitudes: &[Vec<f64>],
    phases: &[Vec<f64>],
    cfg: &StftConfig,
) -> Result<Vec<f32>> {
    cfg.validate()?;
    let n_frames = magnitudes.len();
    let n_bins = cfg.n_freq_bins();
    let window = hann_window(cfg.win_length);
    let out_len = cfg.win_length + cfg.hop * n_frames.saturating_sub(1);

    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(cfg.fft_size);

    let mut acc = vec![0.0f64; out_len];
    let mut norm = vec![0.0f64; out_len];
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];

    for t in 0..n_frames {
        // Rebuild the full hermitian spectrum from the half kept by stft.
        for k in 0..n_bins {
            buf[k] = Complex::from_polar(magnitudes[t][k], phases[t][k]);
        }
        for k in n_bins..cfg.fft_size {
            buf[k] = buf[cfg.fft_size - k].conj();
        }
        ifft.process(&mut buf);
        let start = t * cfg.hop;
        for i in 0..cfg.win_length {
            let x = buf[i].re / cfg.fft_size as f64;
            acc[start + i] += x * window[i];
            norm[start + i] += window[i] * window[i];
        }
    }
    // Samples with almost no window coverage (the very edges) would be
    // amplified by the tiny squared-window sum; emit silence there instead.
    let norm_max = norm.iter().cloned().fold(0.0f64, f64::max);
    let threshold = norm_max * 1e-2;
    Ok(acc
        .iter()
        .zip(&norm)
        .map(|(&a, &n)| if n >= threshold { (a / n) as f32 } else { 0.0 })
        .collect())
}

/// Round-trip helper used by the phase-reconstruction loop.
pub fn reanalyze(samples: &[f32], cfg: &StftConfig) -> Result<Spectrogram> {
    stft(samples, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Waveform;

    fn sine(freq: f64, secs: f64, sr: u32) -> Waveform {
        let n = (secs * sr as f64) as usize;
        let samples: Vec<f32> = (0..n)
            .map(|i| {
                (0.8 * (2.0 * std::f64::consts::PI * freq * i as f64 / sr as f64).sin()) as f32
            })
            .collect();
        Waveform::new(samples, sr).unwrap()
    }

    #[test]
    fn frame_count_matches_config_formula() {
        let cfg = StftConfig::default();
        let w = sine(440.0, 0.5, 16_000);
        let spec = stft(w.samples(), &cfg).unwrap();
        assert_eq!(spec.frames.len(), cfg.frame_count(w.len()).unwrap());
        assert_eq!(spec.n_bins, 513);
    }

    #[test]
    fn sine_peak_lands_on_nearest_bin() {
        let cfg = StftConfig::default();
        let w = sine(1000.0, 0.25, 16_000);
        let spec = stft(w.samples(), &cfg).unwrap();
        let mags = spec.magnitudes();
        let bin_hz = 16_000.0f64 / 1024.0;
        let expect = (1000.0 / bin_hz).round() as usize;
        for row in &mags {
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(argmax, expect);
        }
    }

    #[test]
    fn analysis_synthesis_round_trip_is_close() {
        let cfg = StftConfig::default();
        let w = sine(330.0, 0.4, 16_000);
        let spec = stft(w.samples(), &cfg).unwrap();
        let out = istft(&spec.magnitudes(), &spec.phases(), &cfg).unwrap();
        // Compare the interior (edges lack full overlap).
        let lead = cfg.win_length;
        let n = out.len().min(w.len()) - lead;
        let mut err = 0.0f64;
        for i in lead..n {
            err += (out[i] as f64 - w.samples()[i] as f64).abs();
        }
        assert!(err / ((n - lead) as f64) < 1e-3);
    }
}
