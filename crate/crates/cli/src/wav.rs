//! 16-bit PCM mono RIFF/WAVE files.

use std::path::{Path, PathBuf};

use serialvoc_core::Result;

/// Decoded mono audio; samples are `i16 / 32768`.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioFile {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
    pub path: Option<PathBuf>,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn decode_wav(bytes: &[u8]) -> Result<AudioFile> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        bail!(Format, "not a RIFF/WAVE file");
    }
    let mut at = 12;
    let mut rate = None;
    let mut data = None;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let len = u32_at(bytes, at + 4) as usize;
        let body = at + 8;
        if body + len > bytes.len() {
            bail!(Format, "chunk '{}' runs past the end of the file", String::from_utf8_lossy(id));
        }
        match id {
            b"fmt " => {
                if len < 16 {
                    bail!(Format, "fmt chunk of {len} bytes is too short");
                }
                let tag = u16_at(bytes, body);
                let channels = u16_at(bytes, body + 2);
                let bits = u16_at(bytes, body + 14);
                if tag != 1 {
                    bail!(Format, "unsupported format tag {tag}; only PCM (1) is accepted");
                }
                if channels != 1 {
                    bail!(Format, "unsupported channels={channels}; only mono is accepted");
                }
                if bits != 16 {
                    bail!(Format, "unsupported bits_per_sample={bits}; only 16 is accepted");
                }
                rate = Some(u32_at(bytes, body + 4));
            }
            b"data" => data = Some(&bytes[body..body + len]),
            _ => {}
        }
        at = body + len + (len & 1);
    }
    let Some(sample_rate_hz) = rate else {
        bail!(Format, "missing fmt chunk");
    };
    let Some(data) = data else {
        bail!(Format, "missing data chunk");
    };
    if data.len() % 2 != 0 {
        bail!(Format, "data chunk holds an odd number of bytes");
    }
    let samples = data
        .chunks_exact(2)
        .map(|c| f64::from(i16::from_le_bytes([c[0], c[1]])) / 32768.0)
        .collect();
    Ok(AudioFile { samples, sample_rate_hz, path: None })
}

/// Nearest 16-bit code, saturating outside [-1, 1).
pub fn quantize(x: f64) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn encode_wav(audio: &AudioFile) -> Vec<u8> {
    let n = audio.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + n);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + n as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&audio.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(audio.sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(n as u32).to_le_bytes());
    for &x in &audio.samples {
        out.extend_from_slice(&quantize(x).to_le_bytes());
    }
    out
}

pub fn read_wav(path: &Path) -> Result<AudioFile> {
    let bytes = std::fs::read(path)?;
    let mut a = decode_wav(&bytes).map_err(|e| serialvoc_core::Error::Format(format!("{}: {}", path.display(), strip(&e))))?;
    a.path = Some(path.to_path_buf());
    Ok(a)
}

pub fn write_wav(path: &Path, audio: &AudioFile) -> Result<()> {
    std::fs::write(path, encode_wav(audio))?;
    Ok(())
}

/// Error message without its kind prefix.
pub(crate) fn strip(e: &serialvoc_core::Error) -> String {
    let s = e.to_string();
    match s.split_once(": ") {
        Some((_, rest)) => rest.to_string(),
        None => s,
    }
}
