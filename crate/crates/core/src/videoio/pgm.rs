//! Binary PGM (P5) and PPM (P6) readers and writers.
//!
//! Grayscale frames and masks are 8-bit P5; masks hold only the values
//! {0, 255}. Supervoxel label images use 16-bit P5 (big-endian samples, per
//! the netpbm convention for maxval > 255). Frame intensities are quantized
//! to round(v * 255) on save, so the round trip is exact only for values
//! already on the 8-bit lattice.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Frame, MaskFrame};
use crate::error::{Error, Result};

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: u32,
}

fn read_header(r: &mut impl Read, path: &Path) -> Result<Header> {
    let mut magic = [0u8; 2];
    r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic != b"P5" && &magic != b"P6" {
        return Err(Error::format(path, "not a binary PGM/PPM (bad magic)"));
    }
    // Three whitespace-separated decimal tokens follow; '#' starts a comment.
    let mut tokens = [0u64; 3];
    let mut byte = [0u8; 1];
    for token in tokens.iter_mut() {
        // skip whitespace and comments
        loop {
            r.read_exact(&mut byte).map_err(|e| Error::io(path, e))?;
            match byte[0] {
                b' ' | b'\t' | b'\r' | b'\n' => continue,
                b'#' => {
                    while byte[0] != b'\n' {
                        r.read_exact(&mut byte).map_err(|e| Error::io(path, e))?;
                    }
                }
                _ => break,
            }
        }
        if !byte[0].is_ascii_digit() {
            return Err(Error::format(path, "malformed header"));
        }
        let mut value: u64 = 0;
        while byte[0].is_ascii_digit() {
            value = value * 10 + (byte[0] - b'0') as u64;
            if value > u32::MAX as u64 {
                return Err(Error::format(path, "header value out of range"));
            }
            r.read_exact(&mut byte).map_err(|e| Error::io(path, e))?;
        }
        // `byte` now holds the single whitespace that terminates the token.
        if !byte[0].is_ascii_whitespace() {
            return Err(Error::format(path, "malformed header"));
        }
        *token = value;
    }
    if tokens[0] == 0 || tokens[1] == 0 {
        return Err(Error::format(path, "zero dimension"));
    }
    Ok(Header {
        magic,
        width: tokens[0] as usize,
        height: tokens[1] as usize,
        maxval: tokens[2] as u32,
    })
}

fn write_pnm(
    path: &Path,
    magic: &str,
    width: usize,
    height: usize,
    maxval: u32,
    payload: &[u8],
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(format!("{magic}\n{width} {height}\n{maxval}\n").as_bytes())
        .and_then(|_| w.write_all(payload))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Save a frame: P5 for grayscale, P6 for RGB; intensities quantized to 8 bits.
pub fn save_frame(path: impl AsRef<Path>, frame: &Frame) -> Result<()> {
    let path = path.as_ref();
    let payload: Vec<u8> = frame
        .data
        .iter()
        .map(|v| (v * 255.0).round() as u8)
        .collect();
    let magic = if frame.channels == 1 { "P5" } else { "P6" };
    write_pnm(path, magic, frame.width, frame.height, 255, &payload)
}

pub fn load_frame(path: impl AsRef<Path>) -> Result<Frame> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let h = read_header(&mut r, path)?;
    if h.maxval != 255 {
        return Err(Error::format(
            path,
            format!("unsupported maxval {}", h.maxval),
        ));
    }
    let channels = if &h.magic == b"P5" { 1 } else { 3 };
    let mut payload = vec![0u8; h.width * h.height * channels];
    r.read_exact(&mut payload).map_err(|e| Error::io(path, e))?;
    let data = payload.iter().map(|b| *b as f32 / 255.0).collect();
    Frame::new(h.width, h.height, channels, data)
}

/// Save raw 8-bit grayscale data (used for quantized boundary maps).
pub fn save_gray8(path: impl AsRef<Path>, width: usize, height: usize, data: &[u8]) -> Result<()> {
    write_pnm(path.as_ref(), "P5", width, height, 255, data)
}

pub fn save_mask(path: impl AsRef<Path>, mask: &MaskFrame) -> Result<()> {
    let path = path.as_ref();
    let mut payload = vec![0u8; mask.width() * mask.height()];
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                payload[y * mask.width() + x] = 255;
            }
        }
    }
    write_pnm(path, "P5", mask.width(), mask.height(), 255, &payload)
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<MaskFrame> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let h = read_header(&mut r, path)?;
    if &h.magic != b"P5" || h.maxval != 255 {
        return Err(Error::format(path, "mask must be 8-bit P5"));
    }
    let mut payload = vec![0u8; h.width * h.height];
    r.read_exact(&mut payload).map_err(|e| Error::io(path, e))?;
    let mut mask = MaskFrame::new(h.width, h.height);
    for y in 0..h.height {
        for x in 0..h.width {
            match payload[y * h.width + x] {
                0 => {}
                255 => mask.set(x, y, true),
                other => {
                    return Err(Error::format(
                        path,
                        format!("mask value {other} is neither 0 nor 255"),
                    ))
                }
            }
        }
    }
    Ok(mask)
}

/// Save 16-bit labels as P5 with maxval 65535 (big-endian samples).
pub fn save_labels16(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    labels: &[u16],
) -> Result<()> {
    let path = path.as_ref();
    if labels.len() != width * height {
        return Err(Error::InvalidArgument("label buffer size mismatch".into()));
    }
    let mut payload = Vec::with_capacity(labels.len() * 2);
    for l in labels {
        payload.extend_from_slice(&l.to_be_bytes());
    }
    write_pnm(path, "P5", width, height, 65535, &payload)
}

pub fn load_labels16(path: impl AsRef<Path>) -> Result<(Vec<u16>, usize, usize)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let h = read_header(&mut r, path)?;
    if &h.magic != b"P5" || h.maxval != 65535 {
        return Err(Error::format(path, "labels must be 16-bit P5"));
    }
    let mut payload = vec![0u8; h.width * h.height * 2];
    r.read_exact(&mut payload).map_err(|e| Error::io(path, e))?;
    let labels = payload
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok((labels, h.width, h.height))
}
