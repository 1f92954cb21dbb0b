//! SSTM named-tensor weight container.
//!
//! Layout: magic bytes `SSTM`, one version byte, then the tensor count as an
//! unsigned 32-bit little-endian integer. Each tensor is stored as: name
//! length (u32 LE), UTF-8 name bytes, rank (u32 LE), dims (u32 LE each),
//! then the values as 32-bit little-endian floats in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SSTM";
const VERSION: u8 = 1;

/// A tensor with a name and shape, flat row-major data.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::Argument(format!(
                "tensor {name:?} declares {expected} elements but carries {}",
                data.len()
            )));
        }
        Ok(Self { name, dims, data })
    }
}

pub fn write_tensors(path: impl AsRef<Path>, tensors: &[NamedTensor]) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = File::create(path).map_err(|e| Error::io(&display, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(&display, e);

    w.write_all(MAGIC).map_err(io_err)?;
    w.write_all(&[VERSION]).map_err(io_err)?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())
        .map_err(io_err)?;
    for t in tensors {
        let name = t.name.as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())
            .map_err(io_err)?;
        w.write_all(name).map_err(io_err)?;
        w.write_all(&(t.dims.len() as u32).to_le_bytes())
            .map_err(io_err)?;
        for &d in &t.dims {
            w.write_all(&(d as u32).to_le_bytes()).map_err(io_err)?;
        }
        for &v in &t.data {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn read_tensors(path: impl AsRef<Path>) -> Result<Vec<NamedTensor>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(&display, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| Error::io(&display, e))?;
    if &magic != MAGIC {
        return Err(Error::format(&display, format!("bad magic {magic:?}")));
    }
    let mut version = [0u8; 1];
    r.read_exact(&mut version)
        .map_err(|e| Error::io(&display, e))?;
    if version[0] != VERSION {
        return Err(Error::format(
            &display,
            format!("unsupported version {}", version[0]),
        ));
    }
    let count = read_u32(&mut r, &display)? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(&mut r, &display)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)
            .map_err(|e| Error::io(&display, e))?;
        let name = String::from_utf8(name)
            .map_err(|e| Error::format(&display, format!("tensor name not UTF-8: {e}")))?;
        let rank = read_u32(&mut r, &display)? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(read_u32(&mut r, &display)? as usize);
        }
        let n: usize = dims.iter().product();
        let mut data = vec![0f32; n];
        let mut buf = [0u8; 4];
        for v in data.iter_mut() {
            r.read_exact(&mut buf).map_err(|e| Error::io(&display, e))?;
            *v = f32::from_le_bytes(buf);
        }
        tensors.push(NamedTensor { name, dims, data });
    }
    Ok(tensors)
}

fn read_u32(r: &mut impl Read, path: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    Ok(u32::from_le_bytes(buf))
}
