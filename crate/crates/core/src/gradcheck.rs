//! Central finite-difference gradient checking in 64-bit precision.
//!
//! The numeric side only ever runs forward passes, so it is independent of every
//! backward rule it checks.

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::labels::LabelMap;
use crate::layers::{ConvSpec, ScoreForm};
use crate::rng::{derive_rng, SpRng};
use crate::tensor::{Shape, Tensor};

/// Per-coordinate tolerance on relative error.
pub const REL_TOL: f64 = 1e-4;
/// Denominator floor of the relative error; gradients smaller than this are
/// effectively compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub op: String,
    pub coordinates: usize,
    pub max_rel_error: f64,
    /// Fraction of coordinates with relative error below [`REL_TOL`].
    pub frac_within_tol: f64,
}

impl GradCheckReport {
    /// Every coordinate within [`REL_TOL`].
    pub fn passed(&self) -> bool {
        self.max_rel_error < REL_TOL
    }

    /// The looser rule for graphs with ReLU/max-pool kinks: at least 99% of
    /// coordinates within [`REL_TOL`] and all within 1e-2.
    pub fn passed_loose(&self) -> bool {
        self.frac_within_tol >= 0.99 && self.max_rel_error < 1e-2
    }
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares the analytic gradient of `f` against central differences
/// `(f(x + e) - f(x - e)) / 2e`, `e = 1e-4 * max(1, |x|)`, for every coordinate of
/// every input.
pub fn check<F>(op: &str, inputs: &[Tensor<f64>], f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.variable(t.clone())).collect();
    let loss = f(&mut g, &vars)?;
    let grads = g.backward(loss)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(v, t)| {
            grads
                .get(*v)
                .map(|s| s.to_vec())
                .unwrap_or_else(|| vec![0.0; t.data().len()])
        })
        .collect();

    let eval = |inputs: &[Tensor<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|t| g.constant(t.clone())).collect();
        let l = f(&mut g, &vars)?;
        Ok(g.value(l).data()[0])
    };

    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    let mut max_rel: f64 = 0.0;
    let mut within = 0usize;
    let mut total = 0usize;
    for i in 0..inputs.len() {
        for k in 0..inputs[i].data().len() {
            let x = inputs[i].data()[k];
            let eps = 1e-4 * x.abs().max(1.0);
            work[i].data_mut()[k] = x + eps;
            let fp = eval(&work)?;
            work[i].data_mut()[k] = x - eps;
            let fm = eval(&work)?;
            work[i].data_mut()[k] = x;
            let numeric = (fp - fm) / (2.0 * eps);
            let r = rel_error(analytic[i][k], numeric);
            max_rel = max_rel.max(r);
            if r < REL_TOL {
                within += 1;
            }
            total += 1;
        }
    }
    Ok(GradCheckReport {
        op: op.to_string(),
        coordinates: total,
        max_rel_error: max_rel,
        frac_within_tol: if total == 0 { 1.0 } else { within as f64 / total as f64 },
    })
}

/// Reduces an arbitrary tensor to a scalar through fixed random weights so every
/// output coordinate contributes a distinct sensitivity.
pub fn weighted_sum(g: &mut Graph<f64>, y: Var, rng: &mut SpRng) -> Result<Var> {
    let r = random_tensor(g.shape(y), rng, -1.0, 1.0);
    let c = g.constant(r);
    let p = g.mul(y, c)?;
    g.sum(p)
}

pub fn random_tensor(shape: Shape, rng: &mut impl Rng, lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(lo..hi))
}

/// Values with magnitude in [0.1, 1) and random sign, away from ReLU's kink.
pub fn away_from_zero(shape: Shape, rng: &mut impl Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let m = rng.gen_range(0.1..1.0);
        if rng.gen_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

/// Pairwise distinct values (spacing >= 0.05) so max-pool has no near ties.
pub fn distinct_values(shape: Shape, rng: &mut impl Rng) -> Tensor<f64> {
    let n = shape.numel();
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let data = order.into_iter().map(|k| k as f64 * 0.05 - 1.0).collect();
    Tensor::from_vec(shape, data).expect("same length")
}

fn small_shape(rng: &mut impl Rng, channels: usize) -> Shape {
    Shape::new(rng.gen_range(1..=2), channels, rng.gen_range(2..=5), rng.gen_range(2..=5))
}

pub fn random_labels(shape: Shape, classes: usize, rng: &mut impl Rng, ignore_frac: f64) -> LabelMap {
    let shape = shape.with_channels(1);
    let labels = (0..shape.numel())
        .map(|_| {
            if rng.gen_bool(ignore_frac) {
                255
            } else {
                rng.gen_range(0..classes as u16)
            }
        })
        .collect();
    LabelMap::new(shape, labels, 255).expect("valid shape")
}

/// A named gradient-check case for a single differentiable operation.
pub struct OpCase {
    pub name: &'static str,
    pub run: fn(u64) -> Result<GradCheckReport>,
}

fn conv_case(name: &str, seed: u64, dilation: usize, stride: usize, padding: usize, kernel: usize) -> Result<GradCheckReport> {
    let mut rng = derive_rng(seed, 11, 0);
    let cin = rng.gen_range(1..=3);
    let cout = rng.gen_range(1..=3);
    let spec = ConvSpec::new(cin, cout, kernel)
        .with_dilation(dilation)
        .with_stride(stride)
        .with_padding(padding);
    let ext = spec.effective_extent();
    let side = rng.gen_range(ext.saturating_sub(2 * padding).max(1)..=5);
    let x = random_tensor(Shape::new(rng.gen_range(1..=2), cin, side, side.max(2)), &mut rng, -1.0, 1.0);
    let w = random_tensor(spec.weight_shape(), &mut rng, -1.0, 1.0);
    let b = random_tensor(spec.bias_shape(), &mut rng, -1.0, 1.0);
    check(name, &[x, w, b], move |g, v| {
        let y = g.conv2d(v[0], v[1], Some(v[2]), spec)?;
        let mut r = derive_rng(seed, 12, 0);
        weighted_sum(g, y, &mut r)
    })
}

fn unary_case(
    name: &str,
    seed: u64,
    make: fn(Shape, &mut SpRng) -> Tensor<f64>,
    op: fn(&mut Graph<f64>, Var) -> Result<Var>,
    even: bool,
) -> Result<GradCheckReport> {
    let mut rng = derive_rng(seed, 13, 0);
    let c = rng.gen_range(1..=3);
    let mut shape = small_shape(&mut rng, c);
    if even {
        shape = Shape::new(shape.batch(), shape.channels(), 2 * rng.gen_range(1..=2), 2 * rng.gen_range(1..=2));
    }
    let x = make(shape, &mut rng);
    check(name, &[x], move |g, v| {
        let y = op(g, v[0])?;
        let mut r = derive_rng(seed, 14, 0);
        weighted_sum(g, y, &mut r)
    })
}

fn uniform_pm1(shape: Shape, rng: &mut SpRng) -> Tensor<f64> {
    random_tensor(shape, rng, -1.0, 1.0)
}

fn phi_case(name: &str, seed: u64, form: ScoreForm) -> Result<GradCheckReport> {
    let mut rng = derive_rng(seed, 15, 0);
    let classes = rng.gen_range(2..=4);
    let shape = small_shape(&mut rng, classes);
    let x = match form {
        ScoreForm::Logits => random_tensor(shape, &mut rng, -2.0, 2.0),
        _ => random_tensor(shape, &mut rng, 0.1, 1.0),
    };
    let labels = random_labels(shape, classes, &mut rng, 0.2);
    check(name, &[x], move |g, v| g.phi_loss(v[0], &labels, form))
}

fn binary_case(name: &str, seed: u64, broadcast: bool, op: fn(&mut Graph<f64>, Var, Var) -> Result<Var>) -> Result<GradCheckReport> {
    let mut rng = derive_rng(seed, 16, 0);
    let c = rng.gen_range(1..=3);
    let shape = small_shape(&mut rng, c);
    let a = random_tensor(shape, &mut rng, -1.0, 1.0);
    let b = random_tensor(if broadcast { shape.with_channels(1) } else { shape }, &mut rng, -1.0, 1.0);
    check(name, &[a, b], move |g, v| {
        let y = op(g, v[0], v[1])?;
        let mut r = derive_rng(seed, 17, 0);
        weighted_sum(g, y, &mut r)
    })
}

/// Softmax across N single-channel maps, as the gating normalization uses it.
pub fn softmax_over_experts_case(seed: u64) -> Result<GradCheckReport> {
    let mut rng = derive_rng(seed, 18, 0);
    let n = rng.gen_range(1..=4);
    let shape = small_shape(&mut rng, 1);
    let maps: Vec<Tensor<f64>> = (0..n).map(|_| random_tensor(shape, &mut rng, -2.0, 2.0)).collect();
    check("softmax_over_experts", &maps, move |g, v| {
        let w = crate::moe::softmax_over_experts(g, v)?;
        let mut r = derive_rng(seed, 19, 0);
        let mut terms = Vec::new();
        for wi in w {
            terms.push(weighted_sum(g, wi, &mut r)?);
        }
        g.add_all(&terms)
    })
}

/// Every single-operation case, by name.
pub fn op_cases() -> Vec<OpCase> {
    vec![
        OpCase { name: "conv2d", run: |s| conv_case("conv2d", s, 1, 1, 1, 3) },
        OpCase { name: "conv2d_dilated", run: |s| conv_case("conv2d_dilated", s, 2, 1, 2, 3) },
        OpCase { name: "conv2d_strided", run: |s| conv_case("conv2d_strided", s, 1, 2, 1, 3) },
        OpCase { name: "conv2d_1x1", run: |s| conv_case("conv2d_1x1", s, 1, 1, 0, 1) },
        OpCase { name: "max_pool2", run: |s| unary_case("max_pool2", s, distinct_values, |g, x| g.max_pool2(x), true) },
        OpCase { name: "relu", run: |s| unary_case("relu", s, away_from_zero, |g, x| g.relu(x), false) },
        OpCase { name: "sigmoid", run: |s| unary_case("sigmoid", s, uniform_pm1, |g, x| g.sigmoid(x), false) },
        OpCase { name: "upsample2x", run: |s| unary_case("upsample2x", s, uniform_pm1, |g, x| g.upsample2x(x), false) },
        OpCase { name: "upsample8x", run: |s| unary_case("upsample8x", s, uniform_pm1, |g, x| g.upsample(x, 8), false) },
        OpCase { name: "scale", run: |s| unary_case("scale", s, uniform_pm1, |g, x| g.scale(x, -0.75), false) },
        OpCase { name: "softmax_channels", run: |s| unary_case("softmax_channels", s, uniform_pm1, |g, x| g.softmax_channels(x), false) },
        OpCase { name: "slice_channels", run: |s| unary_case("slice_channels", s, uniform_pm1, |g, x| {
            let c = g.shape(x).channels();
            g.slice_channels(x, c - 1, 1)
        }, false) },
        OpCase { name: "sum", run: |s| unary_case("sum", s, uniform_pm1, |g, x| g.sum(x), false) },
        OpCase { name: "add", run: |s| binary_case("add", s, false, |g, a, b| g.add(a, b)) },
        OpCase { name: "mul", run: |s| binary_case("mul", s, false, |g, a, b| g.mul(a, b)) },
        OpCase { name: "mul_broadcast", run: |s| binary_case("mul_broadcast", s, true, |g, a, b| g.mul(a, b)) },
        OpCase { name: "concat", run: |s| binary_case("concat", s, false, |g, a, b| g.concat(&[a, b, a])) },
        OpCase { name: "softmax_over_experts", run: softmax_over_experts_case },
        OpCase { name: "phi_logits", run: |s| phi_case("phi_logits", s, ScoreForm::Logits) },
        OpCase { name: "phi_probabilities", run: |s| phi_case("phi_probabilities", s, ScoreForm::Probabilities) },
        OpCase { name: "phi_unnormalized", run: |s| phi_case("phi_unnormalized", s, ScoreForm::Unnormalized) },
    ]
}
