//! Waveforms, analysis configuration and mel matrices.

use crate::error::{DspError, Result};

/// Mono waveform with samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(DspError::Validation("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(DspError::Validation("non-finite sample".into()));
        }
        if samples.iter().any(|s| s.abs() > 1.0) {
            return Err(DspError::Validation(
                "samples outside [-1, 1]; peak-normalize first".into(),
            ));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Scales down to a 0.999 peak when needed, then constructs.
    pub fn peak_normalized(mut samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        let peak = samples.iter().fold(0.0f32, |m, s| m.max(s.abs()));
        if peak > 0.999 {
            let scale = 0.999 / peak;
            samples.iter_mut().for_each(|s| *s *= scale);
        }
        Self::new(samples, sample_rate)
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Analysis/synthesis parameters shared by the spectrogram, the phase
/// reconstruction and the pitch tracker.
#[derive(Debug, Clone, PartialEq)]
pub struct StftConfig {
    pub sample_rate: u32,
    pub fft_size: usize,
    pub win_length: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub fmin: f32,
    pub fmax: f32,
    /// Natural-log floor applied to mel amplitudes.
    pub log_floor: f32,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            fft_size: 1024,
            win_length: 1024,
            hop: 256,
            n_mels: 80,
            fmin: 0.0,
            fmax: 8000.0,
            log_floor: 1e-5f32.ln(),
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(DspError::Validation("sample rate must be positive".into()));
        }
        if self.hop == 0 || self.hop > self.win_length || self.win_length > self.fft_size {
            return Err(DspError::Validation(format!(
                "need hop <= window <= fft, got {} / {} / {}",
                self.hop, self.win_length, self.fft_size
            )));
        }
        if self.n_mels == 0 {
            return Err(DspError::Validation("n_mels must be positive".into()));
        }
        let nyquist = self.sample_rate as f32 / 2.0;
        if !(self.fmin >= 0.0 && self.fmin < self.fmax && self.fmax <= nyquist) {
            return Err(DspError::Validation(format!(
                "need 0 <= fmin < fmax <= {nyquist}, got [{}, {}]",
                self.fmin, self.fmax
            )));
        }
        if !self.log_floor.is_finite() {
            return Err(DspError::Validation("log floor must be finite".into()));
        }
        Ok(())
    }

    /// Analysis frame count for a waveform of `len` samples.
    pub fn frame_count(&self, len: usize) -> Result<usize> {
        if len < self.win_length {
            return Err(DspError::Validation(format!(
                "waveform of {len} samples is shorter than the {}-sample window",
                self.win_length
            )));
        }
        Ok(1 + (len - self.win_length) / self.hop)
    }

    pub fn n_freq_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }
}

/// Log-amplitude mel frames, row-major [frames x bands].
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    data: Vec<f32>,
    frames: usize,
    bands: usize,
}

impl MelSpectrogram {
    pub fn new(frames: usize, bands: usize, data: Vec<f32>) -> Result<Self> {
        if frames * bands != data.len() || frames == 0 || bands == 0 {
            return Err(DspError::Validation(format!(
                "mel shape {frames}x{bands} does not match {} values",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(DspError::Validation("non-finite mel value".into()));
        }
        Ok(Self {
            data,
            frames,
            bands,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn value(&self, frame: usize, band: usize) -> f32 {
        self.data[frame * self.bands + band]
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.data[t * self.bands..(t + 1) * self.bands]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_validate() {
        StftConfig::default().validate().unwrap();
    }

    #[test]
    fn bad_windowing_rejected() {
        let cfg = StftConfig {
            hop: 2048,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = StftConfig {
            fmax: 9000.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn frame_count_formula() {
        let cfg = StftConfig::default();
        assert_eq!(cfg.frame_count(1024).unwrap(), 1);
        assert_eq!(cfg.frame_count(1024 + 256).unwrap(), 2);
        assert_eq!(cfg.frame_count(1024 + 255).unwrap(), 1);
        assert!(cfg.frame_count(1023).is_err());
    }

    #[test]
    fn waveform_bounds_enforced() {
        assert!(Waveform::new(vec![0.5, -1.0, 1.0], 16_000).is_ok());
        assert!(Waveform::new(vec![1.5], 16_000).is_err());
        assert!(Waveform::new(vec![f32::NAN], 16_000).is_err());
        let w = Waveform::peak_normalized(vec![2.0, -4.0], 16_000).unwrap();
        assert!((w.samples()[1] + 0.999).abs() < 1e-6);
    }
}
