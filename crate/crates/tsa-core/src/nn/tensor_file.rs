//! Versioned flat-binary parameter files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic  b"TSP1"
//! u32    format version (currently 1)
//! u32    tensor count
//! per tensor:
//!   u32      name length, then that many UTF-8 bytes
//!   u8       rank (1 or 2)
//!   u32×rank dims (rows, cols for rank 2)
//!   f64×n    row-major data, little-endian bit patterns
//! ```
//!
//! Writing the same tensors twice produces identical bytes, which the
//! determinism and freeze tests rely on.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{CoreError, Result};

const MAGIC: &[u8; 4] = b"TSP1";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    V(Array1<f64>),
    M(Array2<f64>),
}

impl TensorData {
    pub fn as_vector(&self) -> Option<&Array1<f64>> {
        match self {
            TensorData::V(v) => Some(v),
            TensorData::M(_) => None,
        }
    }

    pub fn as_matrix(&self) -> Option<&Array2<f64>> {
        match self {
            TensorData::M(m) => Some(m),
            TensorData::V(_) => None,
        }
    }
}

pub fn write_tensors_to<W: Write>(mut w: W, entries: &[(String, TensorData)]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, data) in entries {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        match data {
            TensorData::V(v) => {
                w.write_all(&[1u8])?;
                w.write_all(&(v.len() as u32).to_le_bytes())?;
                for &x in v.iter() {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
            TensorData::M(m) => {
                w.write_all(&[2u8])?;
                w.write_all(&(m.nrows() as u32).to_le_bytes())?;
                w.write_all(&(m.ncols() as u32).to_le_bytes())?;
                for &x in m.iter() {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

pub fn write_tensors(path: &Path, entries: &[(String, TensorData)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensors_to(&mut w, entries)?;
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut raw = vec![0u8; n * 8];
    r.read_exact(&mut raw)?;
    Ok(raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn read_tensors_from<R: Read>(mut r: R, origin: &str) -> Result<Vec<(String, TensorData)>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CoreError::Format(format!("{origin}: bad magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(CoreError::Format(format!(
            "{origin}: unsupported parameter-file version {version}"
        )));
    }
    let count = read_u32(&mut r)? as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        let mut name_raw = vec![0u8; name_len];
        r.read_exact(&mut name_raw)?;
        let name = String::from_utf8(name_raw)
            .map_err(|_| CoreError::Format(format!("{origin}: tensor name is not UTF-8")))?;
        let mut rank = [0u8; 1];
        r.read_exact(&mut rank)?;
        let data = match rank[0] {
            1 => {
                let n = read_u32(&mut r)? as usize;
                TensorData::V(Array1::from(read_f64s(&mut r, n)?))
            }
            2 => {
                let rows = read_u32(&mut r)? as usize;
                let cols = read_u32(&mut r)? as usize;
                let data = read_f64s(&mut r, rows * cols)?;
                TensorData::M(
                    Array2::from_shape_vec((rows, cols), data)
                        .map_err(|e| CoreError::Format(format!("{origin}: {e}")))?,
                )
            }
            k => {
                return Err(CoreError::Format(format!(
                    "{origin}: unsupported tensor rank {k}"
                )))
            }
        };
        entries.push((name, data));
    }
    Ok(entries)
}

pub fn read_tensors(path: &Path) -> Result<Vec<(String, TensorData)>> {
    let r = BufReader::new(File::open(path)?);
    read_tensors_from(r, &path.display().to_string())
}

/// Lookup helper for loaders that expect a fixed tensor set.
pub fn take_tensor(
    entries: &mut Vec<(String, TensorData)>,
    name: &str,
    origin: &str,
) -> Result<TensorData> {
    match entries.iter().position(|(n, _)| n == name) {
        Some(idx) => Ok(entries.remove(idx).1),
        None => Err(CoreError::Format(format!("{origin}: missing tensor `{name}`"))),
    }
}
