//! Training-time augmentation: random rescale, horizontal flip, fixed-size crop.

use rand::Rng;

use crate::labels::LabelMap;
use crate::tensor::{Shape, Tensor};

pub const SCALES: [f64; 5] = [0.5, 0.75, 1.0, 1.25, 1.5];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentParams {
    pub scale: f64,
    pub flip: bool,
    /// Crop offset into the rescaled (and, if needed, padded) sample.
    pub top: usize,
    pub left: usize,
}

pub fn scaled_len(len: usize, scale: f64) -> usize {
    ((len as f64 * scale).round() as usize).max(1)
}

impl AugmentParams {
    /// Draws a scale, a flip and a crop offset for an `h`×`w` sample.
    pub fn sample<R: Rng>(rng: &mut R, h: usize, w: usize, crop: usize) -> Self {
        let scale = SCALES[rng.gen_range(0..SCALES.len())];
        let flip = rng.gen_bool(0.5);
        let (sh, sw) = (scaled_len(h, scale), scaled_len(w, scale));
        let top = rng.gen_range(0..=sh.max(crop) - crop);
        let left = rng.gen_range(0..=sw.max(crop) - crop);
        AugmentParams { scale, flip, top, left }
    }
}

/// Bilinear taps for output index `t` when resampling `src_len` to `dst_len`.
fn bilinear_tap(t: usize, src_len: usize, dst_len: usize) -> (usize, usize, f32) {
    let ratio = src_len as f64 / dst_len as f64;
    let s = ((t as f64 + 0.5) * ratio - 0.5).clamp(0.0, (src_len - 1) as f64);
    let a = s.floor() as usize;
    let b = (a + 1).min(src_len - 1);
    (a, b, (s - a as f64) as f32)
}

fn nearest_tap(t: usize, src_len: usize, dst_len: usize) -> usize {
    let ratio = src_len as f64 / dst_len as f64;
    (((t as f64 + 0.5) * ratio).floor() as usize).min(src_len - 1)
}

/// Resizes every channel of `x` to `h`×`w` with half-pixel-centred bilinear sampling.
pub fn resize_bilinear(x: &Tensor<f32>, h: usize, w: usize) -> Tensor<f32> {
    let s = x.shape();
    let (ih, iw) = (s.height(), s.width());
    let rows: Vec<_> = (0..h).map(|i| bilinear_tap(i, ih, h)).collect();
    let cols: Vec<_> = (0..w).map(|j| bilinear_tap(j, iw, w)).collect();
    let src = x.data();
    Tensor::from_fn(Shape::new(s.batch(), s.channels(), h, w), |[n, c, i, j]| {
        let (r0, r1, ry) = rows[i];
        let (c0, c1, cx) = cols[j];
        let p = |r, c_| src[s.index(n, c, r, c_)];
        let top = p(r0, c0) + cx * (p(r0, c1) - p(r0, c0));
        let bottom = p(r1, c0) + cx * (p(r1, c1) - p(r1, c0));
        top + ry * (bottom - top)
    })
}

pub fn resize_nearest(l: &LabelMap, h: usize, w: usize) -> LabelMap {
    let s = l.shape();
    let rows: Vec<_> = (0..h).map(|i| nearest_tap(i, s.height(), h)).collect();
    let cols: Vec<_> = (0..w).map(|j| nearest_tap(j, s.width(), w)).collect();
    let mut out = Vec::with_capacity(s.batch() * h * w);
    for n in 0..s.batch() {
        for r in &rows {
            for c in &cols {
                out.push(l.at(n, *r, *c));
            }
        }
    }
    LabelMap::new(Shape::new(s.batch(), 1, h, w), out, l.ignore).expect("consistent shape")
}

pub fn flip_image(x: &Tensor<f32>) -> Tensor<f32> {
    let w = x.shape().width();
    Tensor::from_fn(x.shape(), |[n, c, i, j]| x.at(n, c, i, w - 1 - j))
}

pub fn flip_labels(l: &LabelMap) -> LabelMap {
    let s = l.shape();
    let w = s.width();
    let mut out = l.clone();
    for n in 0..s.batch() {
        for i in 0..s.height() {
            for j in 0..w {
                out.labels_mut()[s.index(n, 0, i, j)] = l.at(n, i, w - 1 - j);
            }
        }
    }
    out
}

/// Crops `crop`×`crop` at (`top`, `left`); positions outside the source become
/// image zeros and ignore labels.
pub fn crop_pair(x: &Tensor<f32>, l: &LabelMap, top: usize, left: usize, crop: usize) -> (Tensor<f32>, LabelMap) {
    let s = x.shape();
    let inside = |i: usize, j: usize| top + i < s.height() && left + j < s.width();
    let image = Tensor::from_fn(Shape::new(s.batch(), s.channels(), crop, crop), |[n, c, i, j]| {
        if inside(i, j) {
            x.at(n, c, top + i, left + j)
        } else {
            0.0
        }
    });
    let mut labels = Vec::with_capacity(s.batch() * crop * crop);
    for n in 0..s.batch() {
        for i in 0..crop {
            for j in 0..crop {
                labels.push(if inside(i, j) { l.at(n, top + i, left + j) } else { l.ignore });
            }
        }
    }
    let labels = LabelMap::new(Shape::new(s.batch(), 1, crop, crop), labels, l.ignore).expect("consistent shape");
    (image, labels)
}

pub fn augment_with(x: &Tensor<f32>, l: &LabelMap, p: &AugmentParams, crop: usize) -> (Tensor<f32>, LabelMap) {
    let s = x.shape();
    let (h, w) = (scaled_len(s.height(), p.scale), scaled_len(s.width(), p.scale));
    let (mut x, mut l) = if p.scale == 1.0 {
        (x.clone(), l.clone())
    } else {
        (resize_bilinear(x, h, w), resize_nearest(l, h, w))
    };
    if p.flip {
        x = flip_image(&x);
        l = flip_labels(&l);
    }
    crop_pair(&x, &l, p.top, p.left, crop)
}

/// Random scale from [`SCALES`], horizontal flip with probability 0.5 and a
/// random `crop`×`crop` window, applied identically to image and labels.
pub fn augment<R: Rng>(x: &Tensor<f32>, l: &LabelMap, rng: &mut R, crop: usize) -> (Tensor<f32>, LabelMap) {
    let s = x.shape();
    let p = AugmentParams::sample(rng, s.height(), s.width(), crop);
    augment_with(x, l, &p, crop)
}
