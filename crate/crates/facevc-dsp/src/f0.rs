//! Autocorrelation pitch tracker over the same frame grid as the mel
//! analysis, with per-utterance z-normalized log-F0.

use crate::error::{DspError, Result};
use crate::types::{StftConfig, Waveform};

pub const F0_MIN_HZ: f64 = 60.0;
pub const F0_MAX_HZ: f64 = 500.0;
const VOICING_THRESHOLD: f64 = 0.3;
const ENERGY_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F0Frame {
    pub f0_hz: f32,
    pub voiced: bool,
}

/// Per-frame pitch plus the normalized log-F0 conditioning track (zeros on
/// unvoiced frames).
#[derive(Debug, Clone)]
pub struct F0Track {
    pub frames: Vec<F0Frame>,
    pub normalized: Vec<f32>,
}

impl F0Track {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn voiced_fraction(&self) -> f64 {
        if self.frames.is_empty() {
            return 0.0;
        }
        self.frames.iter().filter(|f| f.voiced).count() as f64 / self.frames.len() as f64
    }
}

/// Normalized-autocorrelation peak search in [60, 500] Hz; a frame is voiced
/// when the peak exceeds 0.3 of the zero-lag energy. Lag refinement is
/// parabolic.
pub fn extract_f0(w: &Waveform, cfg: &StftConfig) -> Result<F0Track> {
    if w.sample_rate() < 8000 {
        return Err(DspError::Validation(format!(
            "pitch tracking needs at least 8 kHz audio, got {}",
            w.sample_rate()
        )));
    }
    let n_frames = cfg.frame_count(w.len())?;
    let sr = w.sample_rate() as f64;
    let win = cfg.win_length;
    let lag_min = (sr / F0_MAX_HZ).ceil() as usize;
    let lag_max = ((sr / F0_MIN_HZ).floor() as usize).min(win - 1);

    let mut frames = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let start = t * cfg.hop;
        let slice = &w.samples()[start..start + win];
        let mean = slice.iter().map(|&s| s as f64).sum::<f64>() / win as f64;
        let x: Vec<f64> = slice.iter().map(|&s| s as f64 - mean).collect();
        let energy: f64 = x.iter().map(|v| v * v).sum();
        if energy < ENERGY_FLOOR {
            frames.push(F0Frame {
                f0_hz: 0.0,
                voiced: false,
            });
            continue;
        }

        let corr = |lag: usize| -> f64 {
            let mut acc = 0.0;
            for i in 0..win - lag {
                acc += x[i] * x[i + lag];
            }
            acc / energy
        };

        let mut best_lag = lag_min;
        let mut best_val = f64::NEG_INFINITY;
        let mut values = Vec::with_capacity(lag_max - lag_min + 1);
        for lag in lag_min..=lag_max {
            let v = corr(lag);
            values.push(v);
            if v > best_val {
                best_val = v;
                best_lag = lag;
            }
        }

        if best_val <= VOICING_THRESHOLD {
            frames.push(F0Frame {
                f0_hz: 0.0,
                voiced: false,
            });
            continue;
        }

        // Parabolic interpolation around the peak for sub-sample lag.
        let refined = if best_lag > lag_min && best_lag < lag_max {
            let i = best_lag - lag_min;
            let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
            let denom = a - 2.0 * b + c;
            if denom.abs() > 1e-12 {
                best_lag as f64 + 0.5 * (a - c) / denom
            } else {
                best_lag as f64
            }
        } else {
            best_lag as f64
        };

        frames.push(F0Frame {
            f0_hz: (sr / refined) as f32,
            voiced: true,
        });
    }

    Ok(F0Track {
        normalized: normalize_log_f0(&frames),
        frames,
    })
}

/// z-normalizes ln(F0) over voiced frames; unvoiced frames carry 0.
fn normalize_log_f0(frames: &[F0Frame]) -> Vec<f32> {
    let logs: Vec<f64> = frames
        .iter()
        .filter(|f| f.voiced)
        .map(|f| (f.f0_hz as f64).ln())
        .collect();
    if logs.is_empty() {
        return vec![0.0; frames.len()];
    }
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    let var = logs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / logs.len() as f64;
    let std = var.sqrt().max(1e-6);
    frames
        .iter()
        .map(|f| {
            if f.voiced {
                (((f.f0_hz as f64).ln() - mean) / std) as f32
            } else {
                0.0
            }
        })
        .collect()
}
