//! Mixture-of-experts segmentation head.
//!
//! N experts share one input map; expert `i` runs a 3x3 convolution with
//! dilation `d_i` followed by two 1x1 convolutions and emits a per-class map. A
//! convolutional gating network produces one spatial logit map per expert; a
//! per-pixel softmax turns them into weights, and the head output is the
//! weight-blended sum of the expert maps.

mod errors;
pub mod toy;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use errors::{comp_error, coop_error};

use crate::error::{shape_err, Error, Result};
use crate::graph::{Graph, Var};
use crate::labels::LabelMap;
use crate::layers::{ConvSpec, ScoreForm};
use crate::nn::{Conv, Init};
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// What the gating network looks at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GatingKind {
    /// The shared input map fed to every expert (C1 channels).
    CommonFeatures,
    /// The concatenated intermediate expert features (N * C2 channels).
    ExpertFeatures,
    /// The concatenated expert predictions (N * C3 channels).
    Predictions,
}

/// Whether expert maps are blended as probabilities or as raw logits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AggregationForm {
    #[default]
    Probability,
    Logit,
}

/// Per-pixel softmax across N single-channel maps.
pub fn softmax_over_experts<S: Scalar>(g: &mut Graph<S>, logits: &[Var]) -> Result<Vec<Var>> {
    let first = *logits.first().ok_or_else(|| shape_err!("softmax over zero experts"))?;
    let s0 = g.shape(first);
    for v in logits {
        let s = g.shape(*v);
        if s != s0 || s.channels() != 1 {
            return Err(shape_err!("gate logits must share a (N,1,H,W) shape: {s0} vs {s}"));
        }
    }
    let stacked = g.concat(logits)?;
    let p = g.softmax_channels(stacked)?;
    (0..logits.len()).map(|i| g.slice_channels(p, i, 1)).collect()
}

/// A = sum_i F_i * W_i, each W_i broadcast over the class channels.
pub fn moe_aggregate<S: Scalar>(g: &mut Graph<S>, preds: &[Var], gates: &[Var]) -> Result<Var> {
    Ok(weighted_terms(g, preds, gates)?.1)
}

fn weighted_terms<S: Scalar>(g: &mut Graph<S>, preds: &[Var], gates: &[Var]) -> Result<(Vec<Var>, Var)> {
    if preds.len() != gates.len() || preds.is_empty() {
        return Err(shape_err!("{} predictions vs {} gate maps", preds.len(), gates.len()));
    }
    let weighted = preds
        .iter()
        .zip(gates)
        .map(|(f, w)| g.mul(*f, *w))
        .collect::<Result<Vec<_>>>()?;
    let agg = g.add_all(&weighted)?;
    Ok((weighted, agg))
}

/// Weights-only parameter count of the gating network, following
/// CF: C1*C4*3*3 + C4*N, EF: N*C2*C4*3*3 + C4*N, P: N*C3*N*3*3.
pub fn gating_param_count(kind: GatingKind, n: usize, c1: usize, c2: usize, c3: usize, c4: usize) -> usize {
    match kind {
        GatingKind::CommonFeatures => c1 * c4 * 3 * 3 + c4 * n,
        GatingKind::ExpertFeatures => n * c2 * c4 * 3 * 3 + c4 * n,
        GatingKind::Predictions => n * c3 * n * 3 * 3,
    }
}

#[derive(Clone, Debug)]
pub struct Expert {
    pub dilation: usize,
    e1: Conv,
    e2: Conv,
    e3: Conv,
}

/// Intermediate features and class map of one expert.
#[derive(Clone, Copy, Debug)]
pub struct ExpertOutput {
    pub features: Var,
    pub prediction: Var,
}

impl Expert {
    pub fn new<S: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<S>,
        name: &str,
        in_channels: usize,
        hidden: usize,
        classes: usize,
        dilation: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Expert {
            dilation,
            e1: Conv::new(store, &format!("{name}.e1"), ConvSpec::same3x3(in_channels, hidden, dilation), Init::He, rng)?,
            e2: Conv::new(store, &format!("{name}.e2"), ConvSpec::new(hidden, hidden, 1), Init::He, rng)?,
            e3: Conv::new(store, &format!("{name}.e3"), ConvSpec::new(hidden, classes, 1), Init::He, rng)?,
        })
    }

    /// Features after e2, class map after e3 (softmaxed in probability form).
    pub fn forward<S: Scalar>(
        &self,
        g: &mut Graph<S>,
        store: &ParamStore<S>,
        s: Var,
        form: AggregationForm,
    ) -> Result<ExpertOutput> {
        let h = self.e1.forward(g, store, s)?;
        let h = g.relu(h)?;
        let f = self.e2.forward(g, store, h)?;
        let features = g.relu(f)?;
        let logits = self.e3.forward(g, store, features)?;
        let prediction = match form {
            AggregationForm::Probability => g.softmax_channels(logits)?,
            AggregationForm::Logit => logits,
        };
        Ok(ExpertOutput { features, prediction })
    }

    pub fn convs(&self) -> [&Conv; 3] {
        [&self.e1, &self.e2, &self.e3]
    }
}

/// Gating network: a 3x3 convolution, then (for CF/EF, or P in two-layer mode)
/// ReLU and a 1x1 convolution down to N logit maps.
#[derive(Clone, Debug)]
pub struct Gating {
    pub kind: GatingKind,
    g1: Conv,
    g2: Option<Conv>,
}

#[derive(Clone, Copy, Debug)]
pub struct GatingConfig {
    pub kind: GatingKind,
    pub hidden: usize,
    pub two_layer_predictions: bool,
    pub zero_init_output: bool,
}

impl Gating {
    #[allow(clippy::too_many_arguments)]
    pub fn new<S: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<S>,
        name: &str,
        cfg: GatingConfig,
        experts: usize,
        c1: usize,
        c2: usize,
        c3: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let in_channels = match cfg.kind {
            GatingKind::CommonFeatures => c1,
            GatingKind::ExpertFeatures => experts * c2,
            GatingKind::Predictions => experts * c3,
        };
        let out_init = if cfg.zero_init_output { Init::Zero } else { Init::He };
        let single = cfg.kind == GatingKind::Predictions && !cfg.two_layer_predictions;
        if single {
            let g1 = Conv::new(store, &format!("{name}.g1"), ConvSpec::same3x3(in_channels, experts, 1), out_init, rng)?;
            return Ok(Gating { kind: cfg.kind, g1, g2: None });
        }
        let g1 = Conv::new(store, &format!("{name}.g1"), ConvSpec::same3x3(in_channels, cfg.hidden, 1), Init::He, rng)?;
        let g2 = Conv::new(store, &format!("{name}.g2"), ConvSpec::new(cfg.hidden, experts, 1), out_init, rng)?;
        Ok(Gating { kind: cfg.kind, g1, g2: Some(g2) })
    }

    pub fn input_channels(&self) -> usize {
        self.g1.spec.in_channels
    }

    pub fn experts(&self) -> usize {
        self.g2.as_ref().unwrap_or(&self.g1).spec.out_channels
    }

    /// Weights-only parameter count of this instance.
    pub fn weight_count(&self) -> usize {
        self.g1.spec.weight_count() + self.g2.as_ref().map_or(0, |c| c.spec.weight_count())
    }

    pub fn convs(&self) -> Vec<&Conv> {
        std::iter::once(&self.g1).chain(self.g2.as_ref()).collect()
    }

    /// Gate logit maps G (N channels) for an already assembled gating input.
    pub fn logits<S: Scalar>(&self, g: &mut Graph<S>, store: &ParamStore<S>, input: Var) -> Result<Var> {
        let c = g.shape(input).channels();
        if c != self.input_channels() {
            return Err(Error::Config(format!(
                "{:?} gating expects {} input channels, got {c}",
                self.kind,
                self.input_channels()
            )));
        }
        let h = self.g1.forward(g, store, input)?;
        match &self.g2 {
            None => Ok(h),
            Some(g2) => {
                let h = g.relu(h)?;
                g2.forward(g, store, h)
            }
        }
    }

    /// N normalized gate maps, each (N_b, 1, H, W).
    pub fn forward<S: Scalar>(&self, g: &mut Graph<S>, store: &ParamStore<S>, inputs: &GatingInputs<'_>) -> Result<Vec<Var>> {
        let input = match self.kind {
            GatingKind::CommonFeatures => inputs.shared,
            GatingKind::ExpertFeatures => g.concat(inputs.features)?,
            GatingKind::Predictions => g.concat(inputs.predictions)?,
        };
        let logits = self.logits(g, store, input)?;
        let n = g.shape(logits).channels();
        let maps = (0..n)
            .map(|i| g.slice_channels(logits, i, 1))
            .collect::<Result<Vec<_>>>()?;
        softmax_over_experts(g, &maps)
    }
}

/// Candidate gating inputs; each gating kind uses one of them.
pub struct GatingInputs<'a> {
    pub shared: Var,
    pub features: &'a [Var],
    pub predictions: &'a [Var],
}

/// Experts, optional gating network (uniform weights when absent), blending rule.
#[derive(Clone, Debug)]
pub struct MoeHead {
    pub experts: Vec<Expert>,
    pub gating: Option<Gating>,
    pub form: AggregationForm,
    pub classes: usize,
}

#[derive(Clone, Debug)]
pub struct MoeOutput {
    pub expert_features: Vec<Var>,
    pub expert_preds: Vec<Var>,
    pub gate_maps: Vec<Var>,
    /// F_i * W_i per expert.
    pub weighted: Vec<Var>,
    pub aggregate: Var,
}

impl MoeHead {
    pub fn forward<S: Scalar>(&self, g: &mut Graph<S>, store: &ParamStore<S>, s: Var) -> Result<MoeOutput> {
        let mut features = Vec::with_capacity(self.experts.len());
        let mut preds = Vec::with_capacity(self.experts.len());
        for e in &self.experts {
            let o = e.forward(g, store, s, self.form)?;
            features.push(o.features);
            preds.push(o.prediction);
        }
        let gates = match &self.gating {
            Some(gating) => gating.forward(
                g,
                store,
                &GatingInputs {
                    shared: s,
                    features: &features,
                    predictions: &preds,
                },
            )?,
            None => uniform_gates(g, g.shape(preds[0]).with_channels(1), self.experts.len()),
        };
        let (weighted, aggregate) = weighted_terms(g, &preds, &gates)?;
        Ok(MoeOutput {
            expert_features: features,
            expert_preds: preds,
            gate_maps: gates,
            weighted,
            aggregate,
        })
    }

    /// Score form the loss uses on the aggregate.
    pub fn aggregate_form(&self) -> ScoreForm {
        match self.form {
            AggregationForm::Probability => ScoreForm::Probabilities,
            AggregationForm::Logit => ScoreForm::Logits,
        }
    }
}

/// N constant maps of value 1/N.
pub fn uniform_gates<S: Scalar>(g: &mut Graph<S>, shape: crate::tensor::Shape, n: usize) -> Vec<Var> {
    let w = S::one() / S::lit(n as f64);
    (0..n).map(|_| g.constant(Tensor::full(shape, w))).collect()
}

/// L = Phi(y, A) + sum_i Phi(y, F_i * W_i).
///
/// `upsample` > 1 bilinearly resizes every term to label resolution first.
/// `aggregate_form` applies to `A`; `term_form` to the weighted expert terms.
pub fn moe_loss<S: Scalar>(
    g: &mut Graph<S>,
    labels: &LabelMap,
    out: &MoeOutput,
    aggregate_form: ScoreForm,
    term_form: ScoreForm,
    upsample: usize,
) -> Result<Var> {
    let resize = |g: &mut Graph<S>, v: Var| if upsample > 1 { g.upsample(v, upsample) } else { Ok(v) };
    let a = resize(g, out.aggregate)?;
    let mut terms = vec![g.phi_loss(a, labels, aggregate_form)?];
    for w in &out.weighted {
        let t = resize(g, *w)?;
        terms.push(g.phi_loss(t, labels, term_form)?);
    }
    g.add_all(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_rng;
    use crate::tensor::Shape;

    #[test]
    fn equal_logits_give_uniform_weights() {
        let mut g = Graph::<f64>::new();
        let maps: Vec<Var> = (0..3).map(|_| g.constant(Tensor::full(Shape::new(1, 1, 2, 2), 0.7))).collect();
        let w = softmax_over_experts(&mut g, &maps).unwrap();
        for v in w {
            assert!(g.value(v).data().iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        }
    }

    #[test]
    fn two_expert_closed_form() {
        let mut g = Graph::<f64>::new();
        let a = g.constant(Tensor::full(Shape::SCALAR, 0.0));
        let b = g.constant(Tensor::full(Shape::SCALAR, 3f64.ln()));
        let w = softmax_over_experts(&mut g, &[a, b]).unwrap();
        assert!((g.value(w[0]).data()[0] - 0.25).abs() < 1e-15);
        assert!((g.value(w[1]).data()[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn mismatched_gate_shapes_rejected() {
        let mut g = Graph::<f64>::new();
        let a = g.constant(Tensor::zeros(Shape::new(1, 1, 2, 2)));
        let b = g.constant(Tensor::zeros(Shape::new(1, 1, 2, 3)));
        assert!(softmax_over_experts(&mut g, &[a, b]).is_err());
        assert!(softmax_over_experts(&mut g, &[]).is_err());
    }

    #[test]
    fn aggregate_hand_value() {
        let mut g = Graph::<f64>::new();
        let preds: Vec<Var> = [1.0, 2.0, 4.0].iter().map(|v| g.constant(Tensor::full(Shape::SCALAR, *v))).collect();
        let gates: Vec<Var> = [0.2, 0.3, 0.5].iter().map(|v| g.constant(Tensor::full(Shape::SCALAR, *v))).collect();
        let a = moe_aggregate(&mut g, &preds, &gates).unwrap();
        assert!((g.value(a).data()[0] - 2.8).abs() < 1e-15);
    }

    #[test]
    fn param_count_formulas() {
        assert_eq!(gating_param_count(GatingKind::Predictions, 4, 512, 1024, 21, 512), 3024);
        assert_eq!(gating_param_count(GatingKind::CommonFeatures, 4, 512, 1024, 21, 512), 2_361_344);
        assert_eq!(
            gating_param_count(GatingKind::ExpertFeatures, 4, 512, 64, 21, 32),
            4 * 64 * 32 * 9 + 32 * 4
        );
    }

    #[test]
    fn instance_weight_count_matches_formula() {
        let mut store = ParamStore::<f32>::new();
        let mut rng = seed_rng(1);
        let (n, c1, c2, c3, c4) = (4, 16, 8, 5, 12);
        for kind in [GatingKind::CommonFeatures, GatingKind::ExpertFeatures, GatingKind::Predictions] {
            let cfg = GatingConfig { kind, hidden: c4, two_layer_predictions: false, zero_init_output: true };
            let gate = Gating::new(&mut store, &format!("{kind:?}"), cfg, n, c1, c2, c3, &mut rng).unwrap();
            assert_eq!(gate.weight_count(), gating_param_count(kind, n, c1, c2, c3, c4));
            assert_eq!(gate.experts(), n);
        }
    }

    #[test]
    fn gating_rejects_wrong_input_width() {
        let mut store = ParamStore::<f64>::new();
        let cfg = GatingConfig { kind: GatingKind::CommonFeatures, hidden: 4, two_layer_predictions: false, zero_init_output: true };
        let gate = Gating::new(&mut store, "g", cfg, 2, 6, 3, 3, &mut seed_rng(0)).unwrap();
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(Shape::new(1, 5, 4, 4)));
        assert!(matches!(gate.logits(&mut g, &store, x), Err(Error::Config(_))));
    }
}
