//! Triangular mel filterbank and the log-mel spectrogram.

use crate::error::Result;
use crate::stft::stft;
use crate::types::{MelSpectrogram, StftConfig, Waveform};

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters, row-major [n_mels x n_freq_bins], plus the band
/// center frequencies in Hz.
pub struct MelFilterbank {
    pub weights: Vec<f64>,
    pub n_mels: usize,
    pub n_bins: usize,
    pub centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(cfg: &StftConfig) -> Result<Self> {
        cfg.validate()?;
        let n_bins = cfg.n_freq_bins();
        let n_mels = cfg.n_mels;
        let mel_lo = hz_to_mel(cfg.fmin as f64);
        let mel_hi = hz_to_mel(cfg.fmax as f64);
        // n_mels + 2 anchor points; triangle m spans points m-1 .. m+1.
        let points_hz: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = cfg.sample_rate as f64 / cfg.fft_size as f64;

        let mut weights = vec![0.0f64; n_mels * n_bins];
        for m in 0..n_mels {
            let (left, center, right) = (points_hz[m], points_hz[m + 1], points_hz[m + 2]);
            for k in 0..n_bins {
                let f = k as f64 * bin_hz;
                let w = if f >= left && f <= center && center > left {
                    (f - left) / (center - left)
                } else if f > center && f <= right && right > center {
                    (right - f) / (right - center)
                } else {
                    0.0
                };
                weights[m * n_bins + k] = w;
            }
            // Narrow low-frequency triangles can fall between bin centers;
            // anchor them to the nearest bin so no band is silent.
            if weights[m * n_bins..(m + 1) * n_bins].iter().all(|&w| w == 0.0) {
                let k = (center / bin_hz).round() as usize;
                weights[m * n_bins + k.min(n_bins - 1)] = 1.0;
            }
        }
        Ok(Self {
            weights,
            n_mels,
            n_bins,
            centers_hz: points_hz[1..=n_mels].to_vec(),
        })
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    /// Magnitude spectrum row -> mel amplitude row.
    pub fn apply(&self, magnitude: &[f64]) -> Vec<f64> {
        (0..self.n_mels)
            .map(|m| {
                self.row(m)
                    .iter()
                    .zip(magnitude)
                    .map(|(w, x)| w * x)
                    .sum()
            })
            .collect()
    }
}

/// Hann STFT magnitude -> mel filterbank -> natural log with floor.
pub fn mel_spectrogram(w: &Waveform, cfg: &StftConfig) -> Result<MelSpectrogram> {
    if w.sample_rate() != cfg.sample_rate {
        return Err(crate::error::DspError::Validation(format!(
            "waveform at {} Hz but config expects {} Hz",
            w.sample_rate(),
            cfg.sample_rate
        )));
    }
    let fb = MelFilterbank::new(cfg)?;
    let spec = stft(w.samples(), cfg)?;
    let floor_amp = (cfg.log_floor as f64).exp();
    let mut data = Vec::with_capacity(spec.frames.len() * cfg.n_mels);
    for frame in &spec.frames {
        let mags: Vec<f64> = frame.iter().map(|c| c.norm()).collect();
        for e in fb.apply(&mags) {
            data.push(e.max(floor_amp).ln() as f32);
        }
    }
    MelSpectrogram::new(spec.frames.len(), cfg.n_mels, data)
}
