//! A small VGG-style encoder producing stride 8, 16 and 32 feature maps.
//!
//! Five blocks of two 3x3 conv + ReLU layers, each followed by 2x2 max-pooling.
//! The outputs of blocks 3, 4 and 5 (after pooling) are the pyramid taps.

use rand::Rng;

use crate::error::{shape_err, Result};
use crate::graph::{Graph, Var};
use crate::layers::ConvSpec;
use crate::nn::{Conv, Init};
use crate::params::ParamStore;
use crate::scalar::Scalar;

/// Feature maps at strides 8, 16 and 32.
#[derive(Clone, Copy, Debug)]
pub struct PyramidFeatures {
    pub f8: Var,
    pub f16: Var,
    pub f32: Var,
}

#[derive(Clone, Debug)]
pub struct Backbone {
    blocks: Vec<[Conv; 2]>,
}

impl Backbone {
    /// `widths[i]` is the channel width of block `i + 1`.
    pub fn new<S: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<S>,
        in_channels: usize,
        widths: [usize; 5],
        rng: &mut R,
    ) -> Result<Self> {
        let mut blocks = Vec::with_capacity(5);
        let mut cin = in_channels;
        for (i, &w) in widths.iter().enumerate() {
            let a = Conv::new(store, &format!("backbone.block{}.conv1", i + 1), ConvSpec::same3x3(cin, w, 1), Init::He, rng)?;
            let b = Conv::new(store, &format!("backbone.block{}.conv2", i + 1), ConvSpec::same3x3(w, w, 1), Init::He, rng)?;
            blocks.push([a, b]);
            cin = w;
        }
        Ok(Backbone { blocks })
    }

    pub fn widths(&self) -> [usize; 5] {
        std::array::from_fn(|i| self.blocks[i][0].spec.out_channels)
    }

    /// `image` must be (N, C, H, W) with H and W divisible by 32.
    pub fn forward<S: Scalar>(&self, g: &mut Graph<S>, store: &ParamStore<S>, image: Var) -> Result<PyramidFeatures> {
        let s = g.shape(image);
        if s.height() % 32 != 0 || s.width() % 32 != 0 || s.height() == 0 || s.width() == 0 {
            return Err(shape_err!("backbone input spatial dims must be positive multiples of 32, got {s}"));
        }
        let mut x = image;
        let mut taps = Vec::with_capacity(3);
        for (i, [a, b]) in self.blocks.iter().enumerate() {
            x = a.forward(g, store, x)?;
            x = g.relu(x)?;
            x = b.forward(g, store, x)?;
            x = g.relu(x)?;
            x = g.max_pool2(x)?;
            if i >= 2 {
                taps.push(x);
            }
        }
        Ok(PyramidFeatures {
            f8: taps[0],
            f16: taps[1],
            f32: taps[2],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_rng;
    use crate::tensor::{Shape, Tensor};

    fn build(widths: [usize; 5]) -> (ParamStore<f32>, Backbone) {
        let mut store = ParamStore::new();
        let bb = Backbone::new(&mut store, 3, widths, &mut seed_rng(0)).unwrap();
        (store, bb)
    }

    #[test]
    fn stride_arithmetic() {
        let (store, bb) = build([4, 4, 32, 64, 128]);
        let mut g = Graph::new();
        let x = g.constant(Tensor::full(Shape::new(2, 3, 64, 64), 0.5));
        let p = bb.forward(&mut g, &store, x).unwrap();
        assert_eq!(g.shape(p.f8), Shape::new(2, 32, 8, 8));
        assert_eq!(g.shape(p.f16), Shape::new(2, 64, 4, 4));
        assert_eq!(g.shape(p.f32), Shape::new(2, 128, 2, 2));
    }

    #[test]
    fn indivisible_input_rejected() {
        let (store, bb) = build([2, 2, 2, 2, 2]);
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(Shape::new(1, 3, 48, 64)));
        assert!(bb.forward(&mut g, &store, x).is_err());
    }

    #[test]
    fn zero_image_gives_zero_features() {
        let (store, bb) = build([2, 2, 3, 3, 3]);
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(Shape::new(1, 3, 32, 32)));
        let p = bb.forward(&mut g, &store, x).unwrap();
        for v in [p.f8, p.f16, p.f32] {
            assert!(g.value(v).data().iter().all(|x| *x == 0.0));
        }
    }
}
