//! Minimal multichannel WAV reader/writer.
//!
//! Reads RIFF/WAVE with format tag 1 (16-bit integer PCM, samples scaled by
//! 1/32768) or tag 3 (32-bit float). Writes tag 3 only, interleaved
//! little-endian. Parse errors carry the byte offset.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::CliError;

#[derive(Debug)]
pub struct WavData {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: f64,
}

fn parse_err(offset: usize, what: impl Into<String>) -> CliError {
    CliError::Data(format!("malformed WAV at byte {offset}: {}", what.into()))
}

fn need(bytes: &[u8], offset: usize, len: usize) -> Result<&[u8], CliError> {
    bytes
        .get(offset..offset + len)
        .ok_or_else(|| parse_err(offset, format!("expected {len} more bytes")))
}

fn u16_at(bytes: &[u8], offset: usize) -> Result<u16, CliError> {
    Ok(u16::from_le_bytes(
        need(bytes, offset, 2)?.try_into().unwrap(),
    ))
}

fn u32_at(bytes: &[u8], offset: usize) -> Result<u32, CliError> {
    Ok(u32::from_le_bytes(
        need(bytes, offset, 4)?.try_into().unwrap(),
    ))
}

pub fn read_wav(path: &Path) -> Result<WavData, CliError> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    decode_wav(&bytes)
}

pub fn decode_wav(bytes: &[u8]) -> Result<WavData, CliError> {
    if need(bytes, 0, 4)? != b"RIFF" {
        return Err(parse_err(0, "missing RIFF tag"));
    }
    if need(bytes, 8, 4)? != b"WAVE" {
        return Err(parse_err(8, "missing WAVE tag"));
    }

    let mut offset = 12usize;
    let mut format: Option<(u16, u16, u32, u16)> = None; // tag, channels, rate, bits
    let mut data: Option<(usize, usize)> = None; // offset, len

    while offset + 8 <= bytes.len() {
        let id = need(bytes, offset, 4)?;
        let size = u32_at(bytes, offset + 4)? as usize;
        let body = offset + 8;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(parse_err(offset, format!("fmt chunk of {size} bytes")));
                }
                let tag = u16_at(bytes, body)?;
                let channels = u16_at(bytes, body + 2)?;
                let rate = u32_at(bytes, body + 4)?;
                let bits = u16_at(bytes, body + 14)?;
                format = Some((tag, channels, rate, bits));
            }
            b"data" => {
                need(bytes, body, size)?;
                data = Some((body, size));
            }
            _ => {}
        }
        offset = body + size + (size & 1); // chunks are word-aligned
    }

    let (tag, channels, rate, bits) =
        format.ok_or_else(|| parse_err(bytes.len(), "no fmt chunk"))?;
    let (data_offset, data_len) = data.ok_or_else(|| parse_err(bytes.len(), "no data chunk"))?;
    if channels == 0 {
        return Err(parse_err(data_offset, "zero channels"));
    }
    let n = channels as usize;

    let interleaved: Vec<f64> = match (tag, bits) {
        (1, 16) => need(bytes, data_offset, data_len)?
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes(c.try_into().unwrap()) as f64 / 32768.0)
            .collect(),
        (3, 32) => need(bytes, data_offset, data_len)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        _ => {
            return Err(parse_err(
                data_offset,
                format!(
                "unsupported format tag {tag} with {bits} bits (need 16-bit PCM or 32-bit float)"
            ),
            ))
        }
    };
    if !interleaved.len().is_multiple_of(n) {
        return Err(parse_err(
            data_offset,
            format!(
                "{} samples do not divide into {n} channels",
                interleaved.len()
            ),
        ));
    }

    let frames = interleaved.len() / n;
    let mut channels_out = vec![Vec::with_capacity(frames); n];
    for (i, v) in interleaved.into_iter().enumerate() {
        channels_out[i % n].push(v);
    }
    Ok(WavData {
        channels: channels_out,
        sample_rate: rate as f64,
    })
}

pub fn write_wav(path: &Path, channels: &[Vec<f64>], sample_rate: f64) -> Result<(), CliError> {
    let n = channels.len() as u32;
    let frames = channels.first().map_or(0, |c| c.len()) as u32;
    let data_len = frames * n * 4;
    let byte_rate = sample_rate as u32 * n * 4;

    let file = File::create(path)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    let io = |e: std::io::Error| CliError::Data(format!("write {}: {e}", path.display()));

    w.write_all(b"RIFF").map_err(io)?;
    w.write_all(&(36 + data_len).to_le_bytes()).map_err(io)?;
    w.write_all(b"WAVE").map_err(io)?;
    w.write_all(b"fmt ").map_err(io)?;
    w.write_all(&16u32.to_le_bytes()).map_err(io)?;
    w.write_all(&3u16.to_le_bytes()).map_err(io)?; // IEEE float
    w.write_all(&(n as u16).to_le_bytes()).map_err(io)?;
    w.write_all(&(sample_rate as u32).to_le_bytes())
        .map_err(io)?;
    w.write_all(&byte_rate.to_le_bytes()).map_err(io)?;
    w.write_all(&((n * 4) as u16).to_le_bytes()).map_err(io)?;
    w.write_all(&32u16.to_le_bytes()).map_err(io)?;
    w.write_all(b"data").map_err(io)?;
    w.write_all(&data_len.to_le_bytes()).map_err(io)?;
    for t in 0..frames as usize {
        for ch in channels {
            w.write_all(&(ch[t] as f32).to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}
