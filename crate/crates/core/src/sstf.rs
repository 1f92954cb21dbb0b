//! SSTF feature file format.
//!
//! Layout: magic bytes `SSTF`, then `T` and `D` as unsigned 32-bit
//! little-endian integers, then `T*D` 32-bit little-endian floats in
//! row-major order, then the frame duration as a 64-bit little-endian float.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::types::AudioFeatures;

const MAGIC: &[u8; 4] = b"SSTF";

pub fn write_features(path: impl AsRef<Path>, features: &AudioFeatures) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = File::create(path).map_err(|e| Error::io(&display, e))?;
    let mut w = BufWriter::new(file);
    write_to(&mut w, features).map_err(|e| Error::io(&display, e))?;
    w.flush().map_err(|e| Error::io(&display, e))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<AudioFeatures> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(&display, e))?;
    read_from(&mut BufReader::new(file), &display)
}

fn write_to(w: &mut impl Write, features: &AudioFeatures) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(features.num_frames() as u32).to_le_bytes())?;
    w.write_all(&(features.feature_dim() as u32).to_le_bytes())?;
    for v in features.frames().iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&features.frame_ms().to_le_bytes())?;
    Ok(())
}

fn read_u32(r: &mut impl Read, path: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_from(r: &mut impl Read, path: &str) -> Result<AudioFeatures> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic != MAGIC {
        return Err(Error::format(path, format!("bad magic {magic:?}")));
    }
    let rows = read_u32(r, path)? as usize;
    let cols = read_u32(r, path)? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::format(
            path,
            format!("degenerate shape {rows}x{cols}"),
        ));
    }
    let mut data = vec![0f32; rows * cols];
    let mut buf = [0u8; 4];
    for v in data.iter_mut() {
        r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
        *v = f32::from_le_bytes(buf);
    }
    let mut fbuf = [0u8; 8];
    r.read_exact(&mut fbuf).map_err(|e| Error::io(path, e))?;
    let frame_ms = f64::from_le_bytes(fbuf);
    let frames = Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| Error::format(path, e.to_string()))?;
    AudioFeatures::new(frames, frame_ms)
        .map_err(|e| Error::format(path, format!("invalid features: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use tempfile::tempdir;

    #[test]
    fn roundtrip_preserves_bits() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("utt.sstf");
        let frames = Array2::from_shape_fn((7, 3), |(i, j)| (i as f32 - 2.5) * 0.3 + j as f32);
        let feats = AudioFeatures::new(frames, 12.5).unwrap();
        write_features(&path, &feats).unwrap();
        let back = read_features(&path).unwrap();
        assert_eq!(back, feats);
    }

    #[test]
    fn bad_magic_is_a_format_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.sstf");
        std::fs::write(&path, b"NOPE\x01\x00\x00\x00").unwrap();
        match read_features(&path) {
            Err(Error::Format { .. }) => {}
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_file_is_an_io_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("short.sstf");
        std::fs::write(&path, b"SSTF\x02\x00\x00\x00\x02\x00\x00\x00\x00\x00").unwrap();
        assert!(read_features(&path).is_err());
    }
}
