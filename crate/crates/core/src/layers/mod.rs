//! Layer kernels. Each operation has a plain tensor function here and a
//! differentiable counterpart on [`crate::graph::Graph`].

pub mod conv;
pub mod loss;
pub mod pool;
pub mod softmax;
pub mod upsample;

pub use conv::{conv2d_forward, ConvSpec};
pub use loss::{phi_loss, PhiValue, ScoreForm, PROB_FLOOR};
pub use pool::max_pool2;
pub use softmax::softmax_channels;
pub use upsample::upsample_bilinear;
