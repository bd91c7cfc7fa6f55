//! Adaptive hierarchical feature aggregation over stride 32/16/8 class-score maps.
//!
//! Each level's score map gets its own 3x3 conv + sigmoid weight map, which
//! rescales the map before the usual upsample-and-sum fusion:
//!
//! ```text
//! A16 = W16 * F16 + up(W32 * F32)
//! A8  = W8  * F8  + up(W16' * A16)      W16' computed from A16
//! ```
//!
//! Replacing every weight map by the constant 1 gives the plain stage-wise sum.

use rand::Rng;

use crate::backbone::PyramidFeatures;
use crate::error::{shape_err, Result};
use crate::graph::{Graph, Var};
use crate::layers::ConvSpec;
use crate::nn::{Conv, Init};
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// The four weight heads: one per pyramid level plus one over the stage-1 aggregate.
#[derive(Clone, Debug)]
pub struct AhfaWeights {
    pub w8: Conv,
    pub w16: Conv,
    pub w32: Conv,
    pub w16_agg: Conv,
}

impl AhfaWeights {
    pub fn new<S: Scalar, R: Rng + ?Sized>(store: &mut ParamStore<S>, classes: usize, init: Init, rng: &mut R) -> Result<Self> {
        let spec = ConvSpec::same3x3(classes, 1, 1);
        Ok(AhfaWeights {
            w8: Conv::new(store, "ahfa.w8", spec, init, rng)?,
            w16: Conv::new(store, "ahfa.w16", spec, init, rng)?,
            w32: Conv::new(store, "ahfa.w32", spec, init, rng)?,
            w16_agg: Conv::new(store, "ahfa.w16_agg", spec, init, rng)?,
        })
    }

    pub fn convs(&self) -> [&Conv; 4] {
        [&self.w8, &self.w16, &self.w32, &self.w16_agg]
    }
}

/// Where the per-level weight maps come from.
#[derive(Clone, Copy, Debug)]
pub enum WeightSource<'a, S> {
    Learned(&'a AhfaWeights),
    /// Every weight map is this constant ("clamp mode").
    Fixed(S),
}

#[derive(Clone, Copy, Debug)]
pub struct WeightMaps {
    pub w8: Var,
    pub w16: Var,
    pub w32: Var,
    pub w16_agg: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct FusionOutput {
    pub a16: Var,
    pub a8: Var,
    pub weights: Option<WeightMaps>,
    /// Pre-sigmoid activations of the learned weight heads.
    pub pre_activations: Option<WeightMaps>,
}

/// Pre-sigmoid activation and sigmoid weight map of one level.
pub fn weight_map<S: Scalar>(g: &mut Graph<S>, store: &ParamStore<S>, f: Var, head: &Conv) -> Result<(Var, Var)> {
    let pre = head.forward(g, store, f)?;
    let w = g.sigmoid(pre)?;
    Ok((pre, w))
}

/// h_c = w * f_c for every channel.
pub fn reweight<S: Scalar>(g: &mut Graph<S>, f: Var, w: Var) -> Result<Var> {
    g.mul(f, w)
}

/// fine + up2x(coarse); the coarse map must be exactly half the fine one.
pub fn fuse_stage<S: Scalar>(g: &mut Graph<S>, fine: Var, coarse: Var) -> Result<Var> {
    let (sf, sc) = (g.shape(fine), g.shape(coarse));
    if sc.height() * 2 != sf.height() || sc.width() * 2 != sf.width() || sc.batch() != sf.batch() || sc.channels() != sf.channels() {
        return Err(shape_err!("fuse_stage: coarse {sc} is not half of fine {sf}"));
    }
    let up = g.upsample2x(coarse)?;
    g.add(fine, up)
}

/// Two-stage weighted fusion of the stride 8/16/32 score maps.
pub fn ahfa_fuse<S: Scalar>(
    g: &mut Graph<S>,
    store: &ParamStore<S>,
    f8: Var,
    f16: Var,
    f32: Var,
    source: WeightSource<'_, S>,
) -> Result<FusionOutput> {
    let level = |g: &mut Graph<S>, f: Var, head: fn(&AhfaWeights) -> &Conv| -> Result<(Option<Var>, Var)> {
        match source {
            WeightSource::Learned(w) => {
                let (pre, map) = weight_map(g, store, f, head(w))?;
                Ok((Some(pre), map))
            }
            WeightSource::Fixed(v) => {
                let shape = g.shape(f).with_channels(1);
                Ok((None, g.constant(Tensor::full(shape, v))))
            }
        }
    };
    let (p32, w32) = level(g, f32, |w| &w.w32)?;
    let (p16, w16) = level(g, f16, |w| &w.w16)?;
    let h32 = reweight(g, f32, w32)?;
    let h16 = reweight(g, f16, w16)?;
    let a16 = fuse_stage(g, h16, h32)?;

    let (p16a, w16a) = level(g, a16, |w| &w.w16_agg)?;
    let (p8, w8) = level(g, f8, |w| &w.w8)?;
    let h8 = reweight(g, f8, w8)?;
    let h16a = reweight(g, a16, w16a)?;
    let a8 = fuse_stage(g, h8, h16a)?;

    let weights = WeightMaps { w8, w16, w32, w16_agg: w16a };
    let pre_activations = match (p8, p16, p32, p16a) {
        (Some(w8), Some(w16), Some(w32), Some(w16_agg)) => Some(WeightMaps { w8, w16, w32, w16_agg }),
        _ => None,
    };
    Ok(FusionOutput {
        a16,
        a8,
        weights: Some(weights),
        pre_activations,
    })
}

/// Plain stage-wise sum: A16 = F16 + up(F32), A8 = F8 + up(A16).
pub fn baseline_fuse<S: Scalar>(g: &mut Graph<S>, f8: Var, f16: Var, f32: Var) -> Result<FusionOutput> {
    let a16 = fuse_stage(g, f16, f32)?;
    let a8 = fuse_stage(g, f8, a16)?;
    Ok(FusionOutput {
        a16,
        a8,
        weights: None,
        pre_activations: None,
    })
}

/// 1x1 score convolutions on each pyramid level, plus AHFA weight heads when present.
#[derive(Clone, Debug)]
pub struct FcnHead {
    pub score8: Conv,
    pub score16: Conv,
    pub score32: Conv,
    pub weights: Option<AhfaWeights>,
}

#[derive(Clone, Copy, Debug)]
pub struct FcnOutput {
    pub f8: Var,
    pub f16: Var,
    pub f32: Var,
    pub fusion: FusionOutput,
}

impl FcnHead {
    pub fn new<S: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<S>,
        widths: [usize; 3],
        classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(FcnHead {
            score8: Conv::new(store, "fcn.score8", ConvSpec::new(widths[0], classes, 1), Init::He, rng)?,
            score16: Conv::new(store, "fcn.score16", ConvSpec::new(widths[1], classes, 1), Init::He, rng)?,
            score32: Conv::new(store, "fcn.score32", ConvSpec::new(widths[2], classes, 1), Init::He, rng)?,
            weights: None,
        })
    }

    pub fn forward<S: Scalar>(&self, g: &mut Graph<S>, store: &ParamStore<S>, pyr: &PyramidFeatures) -> Result<FcnOutput> {
        let f8 = self.score8.forward(g, store, pyr.f8)?;
        let f16 = self.score16.forward(g, store, pyr.f16)?;
        let f32 = self.score32.forward(g, store, pyr.f32)?;
        let fusion = match &self.weights {
            Some(w) => ahfa_fuse(g, store, f8, f16, f32, WeightSource::Learned(w))?,
            None => baseline_fuse(g, f8, f16, f32)?,
        };
        Ok(FcnOutput { f8, f16, f32, fusion })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_rng;
    use crate::tensor::Shape;

    #[test]
    fn zero_head_gives_half() {
        let mut store = ParamStore::<f64>::new();
        let w = AhfaWeights::new(&mut store, 3, Init::Zero, &mut seed_rng(0)).unwrap();
        let mut g = Graph::new();
        let f = g.constant(Tensor::from_fn(Shape::new(1, 3, 4, 4), |[_, c, h, w]| (c + h * w) as f64));
        let (_, m) = weight_map(&mut g, &store, f, &w.w8).unwrap();
        assert_eq!(g.shape(m), Shape::new(1, 1, 4, 4));
        assert!(g.value(m).data().iter().all(|v| *v == 0.5));
    }

    #[test]
    fn large_bias_saturates_near_one() {
        let mut store = ParamStore::<f64>::new();
        let w = AhfaWeights::new(&mut store, 2, Init::ZeroWithBias(20.0), &mut seed_rng(0)).unwrap();
        let mut g = Graph::new();
        let f = g.constant(Tensor::full(Shape::new(1, 2, 2, 2), 3.0));
        let (_, m) = weight_map(&mut g, &store, f, &w.w32).unwrap();
        assert!(g.value(m).data().iter().all(|v| *v >= 1.0 - 1e-8 && *v < 1.0));
    }

    #[test]
    fn fuse_stage_cases() {
        let mut g = Graph::<f64>::new();
        let fine = g.constant(Tensor::full(Shape::new(1, 1, 2, 4), 1.5));
        let zero = g.constant(Tensor::zeros(Shape::new(1, 1, 1, 2)));
        let a = fuse_stage(&mut g, fine, zero).unwrap();
        assert_eq!(g.value(a), g.value(fine));

        let coarse = g.constant(Tensor::from_vec(Shape::new(1, 1, 1, 2), vec![0.0, 1.0]).unwrap());
        let zf = g.constant(Tensor::zeros(Shape::new(1, 1, 2, 4)));
        let a = fuse_stage(&mut g, zf, coarse).unwrap();
        assert_eq!(g.value(a).data(), &[0.0, 0.25, 0.75, 1.0, 0.0, 0.25, 0.75, 1.0]);

        let b = g.constant(Tensor::full(Shape::new(1, 1, 1, 2), 2.0));
        let a = fuse_stage(&mut g, fine, b).unwrap();
        assert!(g.value(a).data().iter().all(|v| *v == 3.5));

        let bad = g.constant(Tensor::zeros(Shape::new(1, 1, 1, 3)));
        assert!(fuse_stage(&mut g, fine, bad).is_err());
    }
}
