//! Named trainable parameters and their initialization.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// Index of a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, Default)]
pub struct ParamStore<S> {
    names: Vec<String>,
    tensors: Vec<Tensor<S>>,
    by_name: HashMap<String, ParamId>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        ParamStore {
            names: Vec::new(),
            tensors: Vec::new(),
            by_name: HashMap::new(),
        }
    }

    /// Registers a parameter. Names must be unique.
    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor<S>) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name {name}")));
        }
        let id = ParamId(self.tensors.len());
        self.by_name.insert(name.clone(), id);
        self.names.push(name);
        self.tensors.push(tensor.into_param());
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor<S> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.tensors[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<S>> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor<S>)> {
        self.tensors
            .iter()
            .enumerate()
            .map(|(i, t)| (ParamId(i), self.names[i].as_str(), t))
    }

    pub fn zero_grad(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::zero_grad);
    }

    /// Replaces a parameter's values, keeping its gradient buffer shape.
    pub fn set_values(&mut self, id: ParamId, values: Tensor<S>) -> Result<()> {
        let cur = &self.tensors[id.0];
        if cur.shape() != values.shape() {
            return Err(Error::Shape(format!(
                "parameter {}: expected {}, got {}",
                self.names[id.0],
                cur.shape(),
                values.shape()
            )));
        }
        self.tensors[id.0] = values.into_param();
        Ok(())
    }

    pub fn total_elements(&self) -> usize {
        self.tensors.iter().map(|t| t.data().len()).sum()
    }
}

/// He-style fan-in scaled uniform initialization: U(-b, b) with b = sqrt(6 / fan_in),
/// where fan_in = in_channels * k * k for a (out, in, k, k) kernel.
pub fn he_uniform<S: Scalar, R: Rng + ?Sized>(shape: Shape, rng: &mut R) -> Tensor<S> {
    let fan_in = (shape.channels() * shape.plane()).max(1);
    let bound = (6.0 / fan_in as f64).sqrt();
    Tensor::from_fn(shape, |_| S::lit(rng.gen_range(-bound..bound)))
}
