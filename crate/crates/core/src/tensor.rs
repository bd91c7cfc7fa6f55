//! Dense rank-4 tensors in (batch, channel, height, width) layout.

use std::fmt;

use crate::error::{shape_err, Result};
use crate::scalar::Scalar;

/// Extents of a rank-4 tensor: `[batch, channels, height, width]`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
pub struct Shape(pub [usize; 4]);

impl Shape {
    pub const SCALAR: Shape = Shape([1, 1, 1, 1]);

    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape([n, c, h, w])
    }

    pub fn batch(&self) -> usize {
        self.0[0]
    }
    pub fn channels(&self) -> usize {
        self.0[1]
    }
    pub fn height(&self) -> usize {
        self.0[2]
    }
    pub fn width(&self) -> usize {
        self.0[3]
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    /// Number of elements of one spatial plane.
    pub fn plane(&self) -> usize {
        self.0[2] * self.0[3]
    }

    pub fn with_channels(self, c: usize) -> Self {
        Shape([self.0[0], c, self.0[2], self.0[3]])
    }

    pub fn is_scalar(&self) -> bool {
        *self == Shape::SCALAR
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.0[1] + c) * self.0[2] + h) * self.0[3] + w
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [n, c, h, w] = self.0;
        write!(f, "({n},{c},{h},{w})")
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A dense tensor with an optional gradient buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S> {
    shape: Shape,
    data: Vec<S>,
    pub requires_grad: bool,
    grad: Option<Vec<S>>,
}

impl<S: Scalar> Tensor<S> {
    pub fn from_vec(shape: Shape, data: Vec<S>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(shape_err!(
                "data length {} does not match shape {shape} ({} elements)",
                data.len(),
                shape.numel()
            ));
        }
        Ok(Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::full(shape, S::zero())
    }

    pub fn full(shape: Shape, value: S) -> Self {
        Tensor {
            shape,
            data: vec![value; shape.numel()],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn scalar(value: S) -> Self {
        Self::full(Shape::SCALAR, value)
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut([usize; 4]) -> S) -> Self {
        let [nb, c, h, w] = shape.0;
        let mut data = Vec::with_capacity(shape.numel());
        for n in 0..nb {
            for ci in 0..c {
                for i in 0..h {
                    for j in 0..w {
                        data.push(f([n, ci, i, j]));
                    }
                }
            }
        }
        Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        }
    }

    /// Marks the tensor as a trainable parameter and allocates a zeroed gradient.
    pub fn into_param(mut self) -> Self {
        self.requires_grad = true;
        self.grad = Some(vec![S::zero(); self.data.len()]);
        self
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    pub fn grad(&self) -> Option<&[S]> {
        self.grad.as_deref()
    }

    pub fn grad_mut(&mut self) -> Option<&mut [S]> {
        self.grad.as_deref_mut()
    }

    /// Splits into the value buffer and the gradient buffer.
    pub fn data_and_grad_mut(&mut self) -> (&mut [S], Option<&mut [S]>) {
        (&mut self.data, self.grad.as_deref_mut())
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|v| *v = S::zero());
        }
    }

    /// Adds `delta` into the gradient buffer, allocating it if needed.
    pub fn accumulate_grad(&mut self, delta: &[S]) -> Result<()> {
        if delta.len() != self.data.len() {
            return Err(shape_err!(
                "gradient length {} does not match tensor {}",
                delta.len(),
                self.shape
            ));
        }
        let g = self
            .grad
            .get_or_insert_with(|| vec![S::zero(); delta.len()]);
        for (g, d) in g.iter_mut().zip(delta) {
            *g = *g + *d;
        }
        Ok(())
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> S {
        self.data[self.shape.index(n, c, h, w)]
    }

    pub fn set(&mut self, idx: [usize; 4], v: S) {
        let [n, c, h, w] = idx;
        let i = self.shape.index(n, c, h, w);
        self.data[i] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .map(|v| T::from_f64(v.to_f64().unwrap_or(f64::NAN)).unwrap_or(T::nan()))
                .collect(),
            requires_grad: self.requires_grad,
            grad: self.grad.as_ref().map(|g| {
                g.iter()
                    .map(|v| T::from_f64(v.to_f64().unwrap_or(f64::NAN)).unwrap_or(T::nan()))
                    .collect()
            }),
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor<S>) -> S {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).abs())
            .fold(S::zero(), S::max)
    }

    /// Per-pixel argmax over channels, as a (N, 1, H, W) vector of class ids.
    pub fn argmax_channels(&self) -> Vec<u16> {
        let [nb, c, h, w] = self.shape.0;
        let plane = h * w;
        let mut out = vec![0u16; nb * plane];
        for n in 0..nb {
            for p in 0..plane {
                let mut best = 0;
                let mut best_v = self.data[n * c * plane + p];
                for ci in 1..c {
                    let v = self.data[(n * c + ci) * plane + p];
                    if v > best_v {
                        best_v = v;
                        best = ci;
                    }
                }
                out[n * plane + p] = best as u16;
            }
        }
        out
    }

    /// Copies batch item `n` into its own (1, C, H, W) tensor.
    pub fn batch_item(&self, n: usize) -> Tensor<S> {
        let per = self.shape.numel() / self.shape.batch().max(1);
        Tensor {
            shape: Shape([1, self.shape.0[1], self.shape.0[2], self.shape.0[3]]),
            data: self.data[n * per..(n + 1) * per].to_vec(),
            requires_grad: false,
            grad: None,
        }
    }

    /// Stacks equally shaped tensors along the batch axis.
    pub fn stack(items: &[Tensor<S>]) -> Result<Tensor<S>> {
        let first = items
            .first()
            .ok_or_else(|| shape_err!("cannot stack zero tensors"))?;
        let [_, c, h, w] = first.shape.0;
        let mut total = 0;
        let mut data = Vec::new();
        for t in items {
            let [n, c2, h2, w2] = t.shape.0;
            if (c2, h2, w2) != (c, h, w) {
                return Err(shape_err!("stack: {} vs {}", first.shape, t.shape));
            }
            total += n;
            data.extend_from_slice(&t.data);
        }
        Tensor::from_vec(Shape([total, c, h, w]), data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_must_match_shape() {
        assert!(Tensor::<f32>::from_vec(Shape::new(1, 2, 2, 2), vec![0.0; 7]).is_err());
        let t = Tensor::<f32>::from_vec(Shape::new(1, 2, 2, 2), vec![0.0; 8]).unwrap();
        assert_eq!(t.shape().numel(), 8);
        assert!(t.grad().is_none());
    }

    #[test]
    fn param_grad_has_data_length() {
        let p = Tensor::<f64>::zeros(Shape::new(2, 3, 1, 1)).into_param();
        assert_eq!(p.grad().unwrap().len(), p.data().len());
        assert!(p.requires_grad);
    }

    #[test]
    fn row_major_indexing() {
        let t = Tensor::<f64>::from_fn(Shape::new(2, 2, 2, 3), |[n, c, h, w]| {
            (n * 1000 + c * 100 + h * 10 + w) as f64
        });
        assert_eq!(t.at(1, 0, 1, 2), 1012.0);
        assert_eq!(t.data()[t.shape().index(1, 1, 0, 1)], 1101.0);
    }

    #[test]
    fn argmax_picks_first_max() {
        let t = Tensor::<f32>::from_vec(Shape::new(1, 3, 1, 2), vec![1.0, 5.0, 3.0, 5.0, 3.0, 0.0])
            .unwrap();
        assert_eq!(t.argmax_channels(), vec![1, 0]);
    }
}
