//! Binary 8-bit greyscale PGM ("P5") export of weight maps.

use std::fs;
use std::path::Path;

use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Encodes a (1, 1, H, W) map of values in [0, 1] as round(v * 255).
pub fn encode<S: Scalar>(map: &Tensor<S>) -> Result<Vec<u8>> {
    let s = map.shape();
    if s.batch() != 1 || s.channels() != 1 {
        return Err(shape_err!("PGM export needs a (1, 1, H, W) map, got {s}"));
    }
    let mut out = format!("P5\n{} {}\n255\n", s.width(), s.height()).into_bytes();
    out.extend(map.data().iter().map(|v| {
        let v = v.to_f64().unwrap_or(0.0).clamp(0.0, 1.0);
        (v * 255.0).round() as u8
    }));
    Ok(out)
}

pub fn write<S: Scalar>(path: impl AsRef<Path>, map: &Tensor<S>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(map)?).map_err(|e| Error::io(path, e))
}
