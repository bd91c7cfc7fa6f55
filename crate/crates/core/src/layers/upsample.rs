//! Bilinear upsampling with the align-corners-false convention.
//!
//! Output coordinate `t` reads source coordinate `(t + 0.5) / f - 0.5`, clamped to
//! `[0, len - 1]`, and interpolates linearly between its two neighbours.

use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

#[derive(Clone, Copy, Debug)]
struct Tap<S> {
    lo: usize,
    hi: usize,
    frac: S,
}

fn taps<S: Scalar>(len: usize, factor: usize) -> Vec<Tap<S>> {
    (0..len * factor)
        .map(|t| {
            let src = ((t as f64 + 0.5) / factor as f64 - 0.5).clamp(0.0, (len - 1) as f64);
            let lo = src.floor() as usize;
            let hi = (lo + 1).min(len - 1);
            Tap {
                lo,
                hi,
                frac: S::lit(src - lo as f64),
            }
        })
        .collect()
}

pub(crate) fn upsample_shape(x: Shape, factor: usize) -> Result<Shape> {
    let [n, c, h, w] = x.0;
    if h == 0 || w == 0 || factor == 0 {
        return Err(shape_err!("cannot upsample {x} by {factor}"));
    }
    Ok(Shape::new(n, c, h * factor, w * factor))
}

/// Upsamples H and W by an integer factor.
pub fn upsample_bilinear<S: Scalar>(x: &Tensor<S>, factor: usize) -> Result<Tensor<S>> {
    let out = upsample_shape(x.shape(), factor)?;
    let [n, c, h, w] = x.shape().0;
    let ty = taps::<S>(h, factor);
    let tx = taps::<S>(w, factor);
    let (ho, wo) = (out.height(), out.width());
    let mut y = Vec::with_capacity(out.numel());
    for plane in 0..n * c {
        let src = &x.data()[plane * h * w..(plane + 1) * h * w];
        for ry in &ty {
            let r0 = &src[ry.lo * w..(ry.lo + 1) * w];
            let r1 = &src[ry.hi * w..(ry.hi + 1) * w];
            for rx in &tx {
                let top = r0[rx.lo] + rx.frac * (r0[rx.hi] - r0[rx.lo]);
                let bot = r1[rx.lo] + rx.frac * (r1[rx.hi] - r1[rx.lo]);
                y.push(top + ry.frac * (bot - top));
            }
        }
    }
    debug_assert_eq!(y.len(), n * c * ho * wo);
    Tensor::from_vec(out, y)
}

pub(crate) fn upsample_backward<S: Scalar>(in_shape: Shape, factor: usize, dy: &[S], dx: &mut [S]) {
    let [n, c, h, w] = in_shape.0;
    let ty = taps::<S>(h, factor);
    let tx = taps::<S>(w, factor);
    let wo = w * factor;
    let ho = h * factor;
    for plane in 0..n * c {
        let g = &dy[plane * ho * wo..(plane + 1) * ho * wo];
        let d = &mut dx[plane * h * w..(plane + 1) * h * w];
        for (i, ry) in ty.iter().enumerate() {
            for (j, rx) in tx.iter().enumerate() {
                let gv = g[i * wo + j];
                let g_top = gv * (S::one() - ry.frac);
                let g_bot = gv * ry.frac;
                let one_x = S::one() - rx.frac;
                d[ry.lo * w + rx.lo] = d[ry.lo * w + rx.lo] + g_top * one_x;
                d[ry.lo * w + rx.hi] = d[ry.lo * w + rx.hi] + g_top * rx.frac;
                d[ry.hi * w + rx.lo] = d[ry.hi * w + rx.lo] + g_bot * one_x;
                d[ry.hi * w + rx.hi] = d[ry.hi * w + rx.hi] + g_bot * rx.frac;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stays_constant() {
        let x = Tensor::<f32>::full(Shape::new(1, 2, 3, 5), 3.0);
        let y = upsample_bilinear(&x, 2).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 2, 6, 10));
        assert!(y.data().iter().all(|v| *v == 3.0));
    }

    #[test]
    fn single_pixel_replicates() {
        let x = Tensor::<f64>::full(Shape::new(1, 1, 1, 1), -1.25);
        let y = upsample_bilinear(&x, 2).unwrap();
        assert_eq!(y.data(), &[-1.25; 4]);
    }

    #[test]
    fn row_zero_one() {
        let x = Tensor::<f64>::from_vec(Shape::new(1, 1, 1, 2), vec![0.0, 1.0]).unwrap();
        let y = upsample_bilinear(&x, 2).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 1, 2, 4));
        assert_eq!(&y.data()[..4], &[0.0, 0.25, 0.75, 1.0]);
        assert_eq!(&y.data()[4..], &[0.0, 0.25, 0.75, 1.0]);
    }

    #[test]
    fn factor_eight_uses_same_rule() {
        let x = Tensor::<f64>::from_vec(Shape::new(1, 1, 1, 2), vec![0.0, 8.0]).unwrap();
        let y = upsample_bilinear(&x, 8).unwrap();
        // source coords (t + 0.5)/8 - 0.5 for t = 0..16, clamped to [0, 1]
        let expect: Vec<f64> = (0..16)
            .map(|t| (((t as f64 + 0.5) / 8.0 - 0.5).clamp(0.0, 1.0)) * 8.0)
            .collect();
        assert_eq!(&y.data()[..16], expect.as_slice());
    }
}
