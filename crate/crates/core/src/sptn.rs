//! The SPTN binary tensor format.
//!
//! Layout (all integers little-endian):
//!
//! | bytes | field                                  |
//! |-------|----------------------------------------|
//! | 4     | magic `53 50 54 4E` ("SPTN")           |
//! | 2     | version, currently 1                   |
//! | 1     | dtype code (0 = f32, 1 = f64)          |
//! | 1     | rank, always 4                         |
//! | 16    | four u32 dims (N, C, H, W)             |
//! | ...   | raw values, row-major                  |

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{DType, Scalar};
use crate::tensor::{Shape, Tensor};

pub const MAGIC: [u8; 4] = *b"SPTN";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 1 + 16;

pub fn encode<S: Scalar>(t: &Tensor<S>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + t.data().len() * S::DTYPE.size());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(S::DTYPE as u8);
    out.push(4);
    for d in t.shape().0 {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        v.write_le(&mut out);
    }
    out
}

fn need(bytes: &[u8], at: usize, len: usize, what: &str) -> Result<()> {
    if bytes.len() < at + len {
        return Err(Error::Format {
            offset: bytes.len(),
            msg: format!("truncated while reading {what} (need {} bytes)", at + len),
        });
    }
    Ok(())
}

pub(crate) fn read_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    need(bytes, at, 4, what)?;
    Ok(u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()))
}

pub(crate) fn read_u16(bytes: &[u8], at: usize, what: &str) -> Result<u16> {
    need(bytes, at, 2, what)?;
    Ok(u16::from_le_bytes(bytes[at..at + 2].try_into().unwrap()))
}

pub(crate) fn check_magic(bytes: &[u8], magic: &[u8; 4]) -> Result<()> {
    need(bytes, 0, 4, "magic")?;
    if &bytes[..4] != magic {
        return Err(Error::Format {
            offset: 0,
            msg: format!(
                "bad magic {:02X?}, expected {:02X?}",
                &bytes[..4],
                magic
            ),
        });
    }
    Ok(())
}

/// Decodes an SPTN buffer. Values stored with the other dtype are converted.
pub fn decode<S: Scalar>(bytes: &[u8]) -> Result<Tensor<S>> {
    check_magic(bytes, &MAGIC)?;
    let version = read_u16(bytes, 4, "version")?;
    if version != VERSION {
        return Err(Error::Format {
            offset: 4,
            msg: format!("unsupported version {version}"),
        });
    }
    need(bytes, 6, 2, "dtype and rank")?;
    let dtype = DType::from_code(bytes[6]).ok_or_else(|| Error::Format {
        offset: 6,
        msg: format!("unknown dtype code {}", bytes[6]),
    })?;
    if bytes[7] != 4 {
        return Err(Error::Format {
            offset: 7,
            msg: format!("rank {} not supported, expected 4", bytes[7]),
        });
    }
    let mut dims = [0usize; 4];
    for (i, d) in dims.iter_mut().enumerate() {
        *d = read_u32(bytes, 8 + 4 * i, "dims")? as usize;
    }
    let shape = Shape(dims);
    let size = dtype.size();
    let body = shape.numel() * size;
    need(bytes, HEADER_LEN, body, "values")?;
    if bytes.len() != HEADER_LEN + body {
        return Err(Error::Format {
            offset: HEADER_LEN + body,
            msg: format!("{} trailing bytes", bytes.len() - HEADER_LEN - body),
        });
    }
    let raw = &bytes[HEADER_LEN..];
    let data: Vec<S> = if dtype == S::DTYPE {
        raw.chunks_exact(size).map(S::read_le).collect()
    } else {
        match dtype {
            DType::F32 => raw
                .chunks_exact(4)
                .map(|c| S::lit(f32::read_le(c) as f64))
                .collect(),
            DType::F64 => raw
                .chunks_exact(8)
                .map(|c| S::from_f64(f64::read_le(c)).unwrap())
                .collect(),
        }
    };
    Tensor::from_vec(shape, data)
}

pub fn write<S: Scalar>(path: impl AsRef<Path>, t: &Tensor<S>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(t)).map_err(|e| Error::io(path, e))
}

pub fn read<S: Scalar>(path: impl AsRef<Path>) -> Result<Tensor<S>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
