//! The `A3MP` array container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes   "A3MP\0\0\0\0"
//! rank    u32       0..=4
//! dims    rank × u32
//! data    product(dims) × f32, row-major
//! ```

use std::path::Path;

use ndarray::{ArrayD, Dimension, IxDyn};

use super::write_atomic;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"A3MP\0\0\0\0";
pub const MAX_RANK: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayFile {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl ArrayFile {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.len() > MAX_RANK {
            return Err(Error::RankTooLarge(shape.len()));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, vec![0.0; n])
    }

    /// Narrows an `f64` array to the on-disk `f32` representation.
    pub fn from_ndarray<D: Dimension>(array: &ndarray::Array<f64, D>) -> Result<Self> {
        let shape = array.shape().to_vec();
        let data = array.iter().map(|&v| v as f32).collect();
        Self::new(shape, data)
    }

    pub fn to_ndarray<D: Dimension>(&self) -> Result<ndarray::Array<f64, D>> {
        let dynamic = ArrayD::from_shape_vec(
            IxDyn(&self.shape),
            self.data.iter().map(|&v| f64::from(v)).collect(),
        )
        .map_err(|e| Error::Shape(e.to_string()))?;
        dynamic
            .into_dimensionality::<D>()
            .map_err(|_| Error::Shape(format!("array of shape {:?} has the wrong rank", self.shape)))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * (1 + self.shape.len() + self.data.len()));
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&(self.shape.len() as u32).to_le_bytes());
        for &d in &self.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses an in-memory buffer; `path` is only used in error messages.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let truncated = |expected: usize| Error::TruncatedPayload {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        };
        if bytes.len() < MAGIC.len() || bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::BadMagic(path.to_path_buf()));
        }
        let mut offset = MAGIC.len();
        let next_u32 = |offset: &mut usize| -> Result<u32> {
            let chunk = bytes
                .get(*offset..*offset + 4)
                .ok_or_else(|| truncated(*offset + 4))?;
            *offset += 4;
            Ok(u32::from_le_bytes(chunk.try_into().expect("4-byte slice")))
        };
        let rank = next_u32(&mut offset)? as usize;
        if rank > MAX_RANK {
            return Err(Error::RankTooLarge(rank));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(next_u32(&mut offset)? as usize);
        }
        let count: usize = shape.iter().product();
        let expected = offset + 4 * count;
        if bytes.len() != expected {
            return Err(truncated(expected));
        }
        let data = bytes[offset..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
            .collect();
        Ok(Self { shape, data })
    }
}

pub fn read_array(path: impl AsRef<Path>) -> Result<ArrayFile> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ArrayFile::from_bytes(&bytes, path)
}

pub fn write_array(array: &ArrayFile, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &array.to_bytes())
}
