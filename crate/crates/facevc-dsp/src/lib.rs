//! Deterministic audio front end: waveform <-> log-mel spectrogram, phase
//! reconstruction in place of a neural vocoder, autocorrelation pitch
//! tracking and RIFF WAV I/O.

pub mod error;
pub mod f0;
pub mod griffin;
pub mod mel;
pub mod stft;
pub mod types;
pub mod wav;

pub use error::{DspError, Result};
pub use f0::{extract_f0, F0Frame, F0Track};
pub use griffin::griffin_lim;
pub use mel::{mel_spectrogram, MelFilterbank};
pub use stft::{hann_window, istft, stft};
pub use types::{MelSpectrogram, StftConfig, Waveform};
pub use wav::{decode_wav, encode_wav, read_wav, write_wav};
