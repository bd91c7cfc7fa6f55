//! A 1-D regression harness comparing the cooperative and competitive
//! mixture-of-experts errors.
//!
//! Target `y = |x|` on `[-1, 1]`, two linear experts `o_i = a_i x + b_i`, and a
//! linear-softmax gate over `x`. Each sample is a (1, 1, 1, 1) tensor slice of a
//! batch, so every graph op is a 1x1 convolution or an elementwise op.

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::layers::ConvSpec;
use crate::nn::{Conv, Init};
use crate::optim::{SgdConfig, SgdState};
use crate::params::ParamStore;
use crate::rng::seed_rng;
use crate::tensor::{Shape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ErrorKind {
    Cooperative,
    Competitive,
}

#[derive(Clone, Debug, Serialize)]
pub struct ToyResult {
    pub initial_mse: f64,
    pub final_mse: f64,
    /// Mean over samples of the largest gate weight; 0.5 is no specialization.
    pub gate_sharpness: f64,
}

struct ToyMoe {
    experts: [Conv; 2],
    gate: Conv,
}

struct ToyForward {
    outputs: [Var; 2],
    gates: [Var; 2],
    blend: Var,
}

impl ToyMoe {
    fn forward(&self, g: &mut Graph<f64>, store: &ParamStore<f64>, x: Var) -> Result<ToyForward> {
        let o0 = self.experts[0].forward(g, store, x)?;
        let o1 = self.experts[1].forward(g, store, x)?;
        let logits = self.gate.forward(g, store, x)?;
        let p = g.softmax_channels(logits)?;
        let g0 = g.slice_channels(p, 0, 1)?;
        let g1 = g.slice_channels(p, 1, 1)?;
        let w0 = g.mul(o0, g0)?;
        let w1 = g.mul(o1, g1)?;
        let blend = g.add(w0, w1)?;
        Ok(ToyForward {
            outputs: [o0, o1],
            gates: [g0, g1],
            blend,
        })
    }
}

/// Graph form of `||y - sum_i g_i o_i||^2`, summed over the batch.
pub fn coop_error_graph(g: &mut Graph<f64>, y: Var, blend: Var) -> Result<Var> {
    let r = g.sub(y, blend)?;
    let sq = g.mul(r, r)?;
    g.sum(sq)
}

/// Graph form of `sum_i g_i ||y - o_i||^2`, summed over the batch.
pub fn comp_error_graph(g: &mut Graph<f64>, y: Var, outputs: &[Var], gates: &[Var]) -> Result<Var> {
    let mut terms = Vec::with_capacity(outputs.len());
    for (o, w) in outputs.iter().zip(gates) {
        let r = g.sub(y, *o)?;
        let sq = g.mul(r, r)?;
        let weighted = g.mul(sq, *w)?;
        terms.push(g.sum(weighted)?);
    }
    g.add_all(&terms)
}

pub fn fit(kind: ErrorKind, seed: u64, steps: usize) -> Result<ToyResult> {
    let mut rng = seed_rng(seed);
    let batch = 64;
    let xs: Vec<f64> = (0..batch).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / batch as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
    let x_t = Tensor::from_vec(Shape::new(batch, 1, 1, 1), xs)?;
    let y_t = Tensor::from_vec(Shape::new(batch, 1, 1, 1), ys)?;

    let mut store = ParamStore::new();
    let experts = [
        Conv::new(&mut store, "expert0", ConvSpec::new(1, 1, 1), Init::He, &mut rng)?,
        Conv::new(&mut store, "expert1", ConvSpec::new(1, 1, 1), Init::He, &mut rng)?,
    ];
    let gate = Conv::new(&mut store, "gate", ConvSpec::new(1, 2, 1), Init::He, &mut rng)?;
    // break the symmetry between experts a little more than He init alone does
    let jitter: f64 = rng.gen_range(-0.1..0.1);
    store.get_mut(experts[1].bias).data_mut()[0] = jitter;
    let model = ToyMoe { experts, gate };

    let mut sgd = SgdState::new(SgdConfig {
        base_lr: 0.05,
        momentum: 0.9,
        weight_decay: 0.0,
        power: 0.9,
        max_iter: steps,
    })?;

    let mse = |store: &ParamStore<f64>| -> Result<(f64, f64)> {
        let mut g = Graph::new();
        let x = g.constant(x_t.clone());
        let f = model.forward(&mut g, store, x)?;
        let blend = g.value(f.blend).data();
        let err = blend
            .iter()
            .zip(y_t.data())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / batch as f64;
        let g0 = g.value(f.gates[0]).data();
        let sharp = g0.iter().map(|w| w.max(1.0 - w)).sum::<f64>() / batch as f64;
        Ok((err, sharp))
    };

    let (initial_mse, _) = mse(&store)?;
    for _ in 0..steps {
        store.zero_grad();
        let mut g = Graph::new();
        let x = g.constant(x_t.clone());
        let y = g.constant(y_t.clone());
        let f = model.forward(&mut g, &store, x)?;
        let loss = match kind {
            ErrorKind::Cooperative => coop_error_graph(&mut g, y, f.blend)?,
            ErrorKind::Competitive => comp_error_graph(&mut g, y, &f.outputs, &f.gates)?,
        };
        let loss = g.scale(loss, 1.0 / batch as f64)?;
        g.backward_into(loss, &mut store)?;
        sgd.step(&mut store)?;
    }
    let (final_mse, gate_sharpness) = mse(&store)?;
    Ok(ToyResult {
        initial_mse,
        final_mse,
        gate_sharpness,
    })
}
