//! `MELB` mel matrix files: magic, u32 frames, u32 bins, then row-major
//! little-endian f32 values.

use std::path::Path;

use serialvoc_core::dsp::{Domain, Spectrogram};
use serialvoc_core::Result;

pub const MAGIC: &[u8; 4] = b"MELB";

pub fn encode_mel(mel: &Spectrogram) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * mel.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(mel.frames() as u32).to_le_bytes());
    out.extend_from_slice(&(mel.bins() as u32).to_le_bytes());
    for &v in mel.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_mel(bytes: &[u8]) -> Result<Spectrogram> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        bail!(Format, "not a MELB file");
    }
    let frames = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let bins = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let want = frames.checked_mul(bins).and_then(|n| n.checked_mul(4)).unwrap_or(usize::MAX);
    if bytes.len() - 12 != want {
        bail!(Format, "MELB header says {frames}x{bins} but holds {} value bytes", bytes.len() - 12);
    }
    let data = bytes[12..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    Spectrogram::new(Domain::Mel, frames, bins, data)
}

pub fn read_mel(path: &Path) -> Result<Spectrogram> {
    decode_mel(&std::fs::read(path)?)
}

pub fn write_mel(path: &Path, mel: &Spectrogram) -> Result<()> {
    std::fs::write(path, encode_mel(mel))?;
    Ok(())
}
