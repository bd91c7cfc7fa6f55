use rand::Rng;

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::layers::ConvSpec;
use crate::params::{he_uniform, ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// How a freshly created convolution is initialized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// He fan-in uniform kernel, zero bias.
    He,
    /// Zero kernel, zero bias.
    Zero,
    /// Zero kernel, constant bias.
    ZeroWithBias(f64),
}

/// A convolution whose kernel and bias live in a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Conv {
    pub spec: ConvSpec,
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Conv {
    /// Registers `{name}.weight` and `{name}.bias`, or reuses them if they already
    /// exist (e.g. loaded from a checkpoint) with matching shapes.
    pub fn new<S: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<S>,
        name: &str,
        spec: ConvSpec,
        init: Init,
        rng: &mut R,
    ) -> Result<Self> {
        let wname = format!("{name}.weight");
        let bname = format!("{name}.bias");
        // draw even when reusing so later layers see the same random stream
        let w_init: Tensor<S> = match init {
            Init::He => he_uniform(spec.weight_shape(), rng),
            Init::Zero | Init::ZeroWithBias(_) => Tensor::zeros(spec.weight_shape()),
        };
        let b_init: Tensor<S> = match init {
            Init::ZeroWithBias(b) => Tensor::full(spec.bias_shape(), S::lit(b)),
            _ => Tensor::zeros(spec.bias_shape()),
        };
        let weight = existing_or_add(store, &wname, w_init)?;
        let bias = existing_or_add(store, &bname, b_init)?;
        Ok(Conv { spec, weight, bias })
    }

    pub fn forward<S: Scalar>(&self, g: &mut Graph<S>, store: &ParamStore<S>, x: Var) -> Result<Var> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        g.conv2d(x, w, Some(b), self.spec)
    }
}

fn existing_or_add<S: Scalar>(store: &mut ParamStore<S>, name: &str, init: Tensor<S>) -> Result<ParamId> {
    match store.id(name) {
        Some(id) => {
            if store.get(id).shape() != init.shape() {
                return Err(crate::Error::Shape(format!(
                    "parameter {name} has shape {}, model expects {}",
                    store.get(id).shape(),
                    init.shape()
                )));
            }
            Ok(id)
        }
        None => store.add(name, init),
    }
}
