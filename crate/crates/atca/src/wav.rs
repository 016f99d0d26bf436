//! 16-bit PCM mono RIFF/WAVE.

use std::fs;
use std::path::Path;

use atca_core::dsp::Waveform;

use crate::error::{Error, Result};

pub const NOMINAL_RATE: u32 = 44_100;

/// `round(x * 32768)` clamped to the i16 range.
pub fn quantize(x: f64) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn encode_wav(w: &Waveform) -> Vec<u8> {
    let data_len = 2 * w.len() as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&w.sample_rate().to_le_bytes());
    out.extend_from_slice(&(2 * w.sample_rate()).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in w.samples() {
        out.extend_from_slice(&quantize(s).to_le_bytes());
    }
    out
}

pub fn write_wav(path: &Path, w: &Waveform) -> Result<()> {
    fs::write(path, encode_wav(w)).map_err(Error::io(path))
}

fn u16_at(b: &[u8], i: usize) -> u16 {
    u16::from_le_bytes([b[i], b[i + 1]])
}

fn u32_at(b: &[u8], i: usize) -> u32 {
    u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]])
}

/// Decode WAV bytes; `path` is only used in error messages.
pub fn decode_wav(bytes: &[u8], path: &Path) -> Result<Waveform> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::NotWav(path.into()));
    }
    let unsupported = |why: String| Error::UnsupportedFormat {
        path: path.into(),
        why,
    };
    let mut pos = 12;
    let mut rate = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        if body + len > bytes.len() {
            return Err(Error::TruncatedFile(path.into()));
        }
        match id {
            b"fmt " => {
                if len < 16 {
                    return Err(Error::TruncatedFile(path.into()));
                }
                let (fmt, channels, bits) = (
                    u16_at(bytes, body),
                    u16_at(bytes, body + 2),
                    u16_at(bytes, body + 14),
                );
                if fmt != 1 {
                    return Err(unsupported(format!(
                        "format tag {fmt}, only PCM is supported"
                    )));
                }
                if channels != 1 {
                    return Err(unsupported(format!(
                        "{channels} channels, only mono is supported"
                    )));
                }
                if bits != 16 {
                    return Err(unsupported(format!(
                        "{bits}-bit samples, only 16-bit is supported"
                    )));
                }
                rate = Some(u32_at(bytes, body + 4));
            }
            b"data" => {
                let rate = rate.ok_or_else(|| unsupported("data chunk before fmt chunk".into()))?;
                if len % 2 != 0 {
                    return Err(Error::TruncatedFile(path.into()));
                }
                if rate != NOMINAL_RATE {
                    log::warn!(
                        "{}: sample rate {rate} Hz (expected {NOMINAL_RATE})",
                        path.display()
                    );
                }
                let samples = bytes[body..body + len]
                    .chunks_exact(2)
                    .map(|c| f64::from(i16::from_le_bytes([c[0], c[1]])) / 32768.0)
                    .collect();
                return Ok(Waveform::new(samples, rate)?);
            }
            _ => {}
        }
        pos = body + len + (len & 1);
    }
    Err(Error::TruncatedFile(path.into()))
}

pub fn load_wav(path: &Path) -> Result<Waveform> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    decode_wav(&bytes, path)
}
