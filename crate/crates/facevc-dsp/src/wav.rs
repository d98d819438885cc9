//! 16-bit PCM mono RIFF WAV reading and writing.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{DspError, Result};
use crate::types::Waveform;

fn u16_at(bytes: &[u8], offset: usize) -> Result<u16> {
    bytes
        .get(offset..offset + 2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .ok_or(DspError::Format {
            offset,
            what: "truncated u16".into(),
        })
}

fn u32_at(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(DspError::Format {
            offset,
            what: "truncated u32".into(),
        })
}

/// Parses a mono 16-bit PCM WAV from bytes.
pub fn decode_wav(bytes: &[u8]) -> Result<Waveform> {
    if bytes.get(0..4) != Some(b"RIFF") {
        return Err(DspError::Format {
            offset: 0,
            what: "missing RIFF magic".into(),
        });
    }
    if bytes.get(8..12) != Some(b"WAVE") {
        return Err(DspError::Format {
            offset: 8,
            what: "missing WAVE tag".into(),
        });
    }

    let mut offset = 12usize;
    let mut format: Option<(u16, u16, u32, u16)> = None; // codec, channels, rate, bits
    let mut data: Option<(usize, usize)> = None; // offset, len

    while offset + 8 <= bytes.len() {
        let id = &bytes[offset..offset + 4];
        let size = u32_at(bytes, offset + 4)? as usize;
        let body = offset + 8;
        if body + size > bytes.len() {
            return Err(DspError::Format {
                offset,
                what: format!("chunk {:?} overruns the file", String::from_utf8_lossy(id)),
            });
        }
        match id {
            b"fmt " => {
                format = Some((
                    u16_at(bytes, body)?,
                    u16_at(bytes, body + 2)?,
                    u32_at(bytes, body + 4)?,
                    u16_at(bytes, body + 14)?,
                ));
            }
            b"data" => {
                data = Some((body, size));
            }
            _ => {}
        }
        offset = body + size + (size & 1);
    }

    let (codec, channels, rate, bits) = format.ok_or(DspError::Format {
        offset: 12,
        what: "no fmt chunk".into(),
    })?;
    if codec != 1 || bits != 16 {
        return Err(DspError::Validation(format!(
            "expected 16-bit PCM, got codec {codec} at {bits} bits"
        )));
    }
    if channels != 1 {
        return Err(DspError::Validation(format!(
            "expected mono audio, got {channels} channels"
        )));
    }
    let (body, size) = data.ok_or(DspError::Format {
        offset,
        what: "no data chunk".into(),
    })?;
    let mut samples = Vec::with_capacity(size / 2);
    for i in (0..size).step_by(2) {
        let v = i16::from_le_bytes([bytes[body + i], bytes[body + i + 1]]);
        samples.push((v as f32 / 32767.0).clamp(-1.0, 1.0));
    }
    Waveform::new(samples, rate)
}

/// Encodes to mono 16-bit PCM WAV bytes.
pub fn encode_wav(w: &Waveform) -> Vec<u8> {
    let data_len = w.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&w.sample_rate().to_le_bytes());
    out.extend_from_slice(&(w.sample_rate() * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in w.samples() {
        let v = (s * 32767.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_wav(path: &Path) -> Result<Waveform> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_wav(&bytes)
}

pub fn write_wav(path: &Path, w: &Waveform) -> Result<()> {
    let bytes = encode_wav(w);
    std::fs::File::create(path)?.write_all(&bytes)?;
    Ok(())
}
