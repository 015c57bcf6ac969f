//! Mono WAV I/O.
//!
//! Reading accepts 16-bit PCM (samples divided by 32768) and 32-bit IEEE
//! float. Writing always produces 16-bit PCM: samples are clipped to
//! [-1, 1 - 2^-15] and rounded half away from zero, so the quantization
//! error of a round trip never exceeds 2^-15.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::model::Waveform;

use super::{FormatError, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;

fn wav_err(path: &Path, message: impl Into<String>) -> FormatError {
    FormatError::Wav { path: path.display().to_string(), message: message.into() }
}

fn u16le(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32le(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Read a mono WAV file into doubles.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(wav_err(path, "not a RIFF/WAVE file"));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // tag, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    let mut pos = 12usize;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32le(&bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start + size;
        if body_end > bytes.len() {
            return Err(wav_err(path, format!("truncated chunk {}", String::from_utf8_lossy(id))));
        }
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(wav_err(path, "fmt chunk too short"));
                }
                fmt = Some((u16le(body, 0), u16le(body, 2), u32le(body, 4), u16le(body, 14)));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        pos = body_end + (size & 1); // chunks are word-aligned
    }

    let (tag, channels, rate, bits) = fmt.ok_or_else(|| wav_err(path, "missing fmt chunk"))?;
    let data = data.ok_or_else(|| wav_err(path, "missing data chunk"))?;
    if channels != 1 {
        return Err(wav_err(path, format!("mono required, got {channels} channels")));
    }
    let samples = match (tag, bits) {
        (FORMAT_PCM, 16) => {
            if data.len() % 2 != 0 {
                return Err(wav_err(path, "data chunk length not a multiple of 2"));
            }
            data.chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
                .collect()
        }
        (FORMAT_IEEE_FLOAT, 32) => {
            if data.len() % 4 != 0 {
                return Err(wav_err(path, "data chunk length not a multiple of 4"));
            }
            data.chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect()
        }
        _ => {
            return Err(wav_err(
                path,
                format!("unsupported format tag {tag} with {bits} bits per sample"),
            ))
        }
    };
    Ok(Waveform { samples, sample_rate: rate })
}

/// Quantize one sample to the 16-bit grid: clip, then round half away from zero.
pub fn quantize_i16(x: f64) -> i16 {
    let clipped = x.clamp(-1.0, 1.0 - (-15f64).exp2());
    (clipped * 32768.0).round() as i16
}

/// Write a waveform as mono 16-bit PCM.
pub fn write_wav(path: impl AsRef<Path>, wave: &Waveform) -> Result<()> {
    let path = path.as_ref();
    if wave.sample_rate == 0 {
        return Err(wav_err(path, "sample rate must be positive"));
    }
    let data_len = wave.samples.len() * 2;
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(b"RIFF")?;
    w.write_all(&(36 + data_len as u32).to_le_bytes())?;
    w.write_all(b"WAVE")?;
    w.write_all(b"fmt ")?;
    w.write_all(&16u32.to_le_bytes())?;
    w.write_all(&FORMAT_PCM.to_le_bytes())?;
    w.write_all(&1u16.to_le_bytes())?;
    w.write_all(&wave.sample_rate.to_le_bytes())?;
    w.write_all(&(wave.sample_rate * 2).to_le_bytes())?;
    w.write_all(&2u16.to_le_bytes())?;
    w.write_all(&16u16.to_le_bytes())?;
    w.write_all(b"data")?;
    w.write_all(&(data_len as u32).to_le_bytes())?;
    for &s in &wave.samples {
        w.write_all(&quantize_i16(s).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}
