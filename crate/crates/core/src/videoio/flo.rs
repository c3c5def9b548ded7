//! Middlebury `.flo` flow files: magic float 202021.25, little-endian i32
//! width and height, then interleaved (u, v) f32 pairs in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::FlowField;
use crate::error::{Error, Result};

const FLO_MAGIC: f32 = 202021.25;

pub fn save_flow(path: impl AsRef<Path>, flow: &FlowField) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    write(&FLO_MAGIC.to_le_bytes())?;
    write(&(flow.width as i32).to_le_bytes())?;
    write(&(flow.height as i32).to_le_bytes())?;
    for i in 0..flow.width * flow.height {
        write(&flow.u[i].to_le_bytes())?;
        write(&flow.v[i].to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_flow(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut buf4 = [0u8; 4];
    let mut read_f32 = |r: &mut BufReader<File>| -> Result<f32> {
        r.read_exact(&mut buf4).map_err(|e| Error::io(path, e))?;
        Ok(f32::from_le_bytes(buf4))
    };
    let magic = read_f32(&mut r)?;
    if magic.to_le_bytes() != FLO_MAGIC.to_le_bytes() {
        return Err(Error::format(path, format!("bad magic number {magic}")));
    }
    let read_i32 = |r: &mut BufReader<File>| -> Result<i32> {
        let mut b = [0u8; 4];
        r.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
        Ok(i32::from_le_bytes(b))
    };
    let width = read_i32(&mut r)?;
    let height = read_i32(&mut r)?;
    if width <= 0 || height <= 0 || width > 100_000 || height > 100_000 {
        return Err(Error::format(
            path,
            format!("implausible dimensions {width}x{height}"),
        ));
    }
    let (width, height) = (width as usize, height as usize);
    let n = width * height;
    let mut payload = vec![0u8; n * 8];
    r.read_exact(&mut payload).map_err(|e| Error::io(path, e))?;
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        u.push(f32::from_le_bytes(
            payload[i * 8..i * 8 + 4].try_into().unwrap(),
        ));
        v.push(f32::from_le_bytes(
            payload[i * 8 + 4..i * 8 + 8].try_into().unwrap(),
        ));
    }
    if u.iter().chain(v.iter()).any(|c| !c.is_finite()) {
        return Err(Error::format(path, "non-finite flow component"));
    }
    Ok(FlowField {
        width,
        height,
        u,
        v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    /// Writes a .flo byte-by-byte without going through `save_flow`, so the
    /// reader is checked against an independently coded writer.
    fn reference_flo_bytes(width: usize, height: usize, uv: &[(f32, f32)]) -> Vec<u8> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&202021.25f32.to_le_bytes());
        bytes.extend_from_slice(&(width as i32).to_le_bytes());
        bytes.extend_from_slice(&(height as i32).to_le_bytes());
        for &(u, v) in uv {
            bytes.extend_from_slice(&u.to_le_bytes());
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes
    }

    #[test]
    fn reads_hand_written_two_pixel_file() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("two.flo");
        std::fs::write(&path, reference_flo_bytes(2, 1, &[(1.0, 0.0), (-1.0, 2.0)])).unwrap();
        let flow = load_flow(&path).unwrap();
        assert_eq!((flow.width, flow.height), (2, 1));
        assert_eq!(flow.u, vec![1.0, -1.0]);
        assert_eq!(flow.v, vec![0.0, 2.0]);
    }

    #[test]
    fn cross_checks_reference_writer_constant_field() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("const.flo");
        let uv: Vec<(f32, f32)> = vec![(3.0, 4.0); 6 * 5];
        std::fs::write(&path, reference_flo_bytes(6, 5, &uv)).unwrap();
        let flow = load_flow(&path).unwrap();
        for y in 0..5 {
            for x in 0..6 {
                assert_eq!(flow.magnitude(x, y), 5.0);
            }
        }
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.flo");
        let mut bytes = reference_flo_bytes(1, 1, &[(0.0, 0.0)]);
        bytes[0] = 0x12;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load_flow(&path), Err(crate::Error::Format { .. })));
    }

    #[test]
    fn truncated_payload_is_io_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("short.flo");
        let mut bytes = reference_flo_bytes(4, 4, &[(1.0, 1.0); 16]);
        bytes.truncate(bytes.len() - 5);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load_flow(&path), Err(crate::Error::Io { .. })));
    }
}
