//! Mixture-of-experts and adaptive hierarchical aggregation heads for scene
//! parsing, built on a small reverse-mode autodiff engine.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`). Training runs in
//! `f32`; gradient checks and bit-exactness oracles run in `f64`. The aliases at
//! the crate root name the two instantiations.

pub mod ahfa;
pub mod backbone;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod graph;
pub mod labels;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod moe;
pub mod nn;
pub mod optim;
pub mod params;
pub mod pipeline;
pub mod pgm;
pub mod rng;
pub mod scalar;
pub mod sptn;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use graph::{Gradients, Graph, Var};
pub use labels::LabelMap;
pub use layers::{ConvSpec, ScoreForm};
pub use optim::{SgdConfig, SgdState};
pub use params::{ParamId, ParamStore};
pub use scalar::{DType, Scalar};
pub use tensor::{Shape, Tensor};

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Graph32 = Graph<f32>;
pub type Graph64 = Graph<f64>;
pub type ParamStore32 = ParamStore<f32>;
pub type ParamStore64 = ParamStore<f64>;
