//! Whole networks: backbone plus a MoE or FCN-style head, per [`ModelKind`].

use crate::ahfa::{AhfaWeights, FcnHead, FcnOutput};
use crate::backbone::Backbone;
use crate::config::{Family, ModelConfig, ModelKind};
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::labels::LabelMap;
use crate::layers::ScoreForm;
use crate::moe::{moe_loss, Expert, Gating, GatingConfig, MoeHead, MoeOutput};
use crate::nn::Init;
use crate::params::{ParamId, ParamStore};
use crate::rng::derive_rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const INIT_STREAM: u64 = 0x1417;

/// Output stride of the head maps.
pub const HEAD_STRIDE: usize = 8;

#[derive(Clone, Debug)]
enum Head {
    Moe(MoeHead),
    Fcn(FcnHead),
}

#[derive(Clone, Debug)]
pub struct Model<S> {
    pub kind: ModelKind,
    pub config: ModelConfig,
    /// 1 while training the baseline head, 2 once weighting heads are attached.
    pub stage: u8,
    pub store: ParamStore<S>,
    /// Parameters present in the stage-1 network; later ones were added by stage 2.
    stage1_params: usize,
    backbone: Backbone,
    head: Head,
}

#[derive(Clone, Debug)]
pub struct ModelOutput {
    /// Head output at stride 8.
    pub scores: Var,
    pub form: ScoreForm,
    pub moe: Option<MoeOutput>,
    pub fcn: Option<FcnOutput>,
}

/// Per-pixel class decisions and class probabilities at input resolution.
#[derive(Clone, Debug)]
pub struct Prediction<S> {
    pub labels: Vec<u16>,
    pub probs: Tensor<S>,
}

impl<S: Scalar> Model<S> {
    /// Fresh stage-1 network with parameters drawn from `seed`.
    pub fn new(kind: ModelKind, config: ModelConfig, seed: u64) -> Result<Self> {
        Self::build(kind, config, 1, ParamStore::new(), seed)
    }

    /// Rebuilds a network around existing parameters; fails if any is missing or misshapen.
    pub fn from_store(kind: ModelKind, config: ModelConfig, stage: u8, store: ParamStore<S>) -> Result<Self> {
        let expected = store.len();
        let model = Self::build(kind, config, stage, store, 0)?;
        if model.store.len() != expected {
            let missing: Vec<_> = model.store.ids().skip(expected).map(|id| model.store.name(id).to_string()).collect();
            return Err(Error::Data(format!("checkpoint lacks parameters {missing:?}")));
        }
        Ok(model)
    }

    fn build(kind: ModelKind, config: ModelConfig, stage: u8, mut store: ParamStore<S>, seed: u64) -> Result<Self> {
        config.validate()?;
        if !(1..=2).contains(&stage) {
            return Err(Error::Usage(format!("stage must be 1 or 2, got {stage}")));
        }
        let mut rng = derive_rng(seed, INIT_STREAM, 1);
        let widths = config.backbone_widths;
        let backbone = Backbone::new(&mut store, 3, widths, &mut rng)?;
        let head = match kind.family() {
            Family::Moe => {
                let experts = config
                    .dilations
                    .iter()
                    .enumerate()
                    .map(|(i, &d)| Expert::new(&mut store, &format!("moe.expert{i}"), widths[2], config.expert_hidden, config.classes, d, &mut rng))
                    .collect::<Result<Vec<_>>>()?;
                Head::Moe(MoeHead { experts, gating: None, form: config.aggregation, classes: config.classes })
            }
            Family::Fcn => Head::Fcn(FcnHead::new(&mut store, [widths[2], widths[3], widths[4]], config.classes, &mut rng)?),
        };
        let stage1_params = store.len();
        let mut model = Model { kind, config, stage: 1, store, stage1_params, backbone, head };
        if stage == 2 {
            model.attach_stage2(seed)?;
        }
        Ok(model)
    }

    /// Adds the gating network or AHFA weight heads (none for baselines) and
    /// moves to stage 2. New parameters are drawn from `seed`.
    pub fn attach_stage2(&mut self, seed: u64) -> Result<()> {
        if self.stage != 1 {
            return Err(Error::Usage("model is already at stage 2".into()));
        }
        let mut rng = derive_rng(seed, INIT_STREAM, 2);
        let c = &self.config;
        match &mut self.head {
            Head::Moe(head) => {
                if let Some(kind) = self.kind.gating() {
                    let cfg = GatingConfig {
                        kind,
                        hidden: c.gating_hidden,
                        two_layer_predictions: c.gating_two_layer,
                        zero_init_output: c.zero_init_gating,
                    };
                    let n = head.experts.len();
                    let c1 = c.backbone_widths[2];
                    head.gating = Some(Gating::new(&mut self.store, "moe.gating", cfg, n, c1, c.expert_hidden, c.classes, &mut rng)?);
                }
            }
            Head::Fcn(head) => {
                if self.kind == ModelKind::FcnAhfa {
                    head.weights = Some(AhfaWeights::new(&mut self.store, c.classes, Init::ZeroWithBias(c.ahfa_init_bias), &mut rng)?);
                }
            }
        }
        self.stage = 2;
        Ok(())
    }

    /// Parameters added by [`Model::attach_stage2`].
    pub fn stage2_params(&self) -> Vec<ParamId> {
        self.store.ids().skip(self.stage1_params).collect()
    }

    pub fn moe_head(&self) -> Option<&MoeHead> {
        match &self.head {
            Head::Moe(h) => Some(h),
            Head::Fcn(_) => None,
        }
    }

    pub fn fcn_head(&self) -> Option<&FcnHead> {
        match &self.head {
            Head::Fcn(h) => Some(h),
            Head::Moe(_) => None,
        }
    }

    pub fn forward(&self, g: &mut Graph<S>, image: Var) -> Result<ModelOutput> {
        let pyr = self.backbone.forward(g, &self.store, image)?;
        match &self.head {
            Head::Moe(head) => {
                let out = head.forward(g, &self.store, pyr.f8)?;
                Ok(ModelOutput { scores: out.aggregate, form: head.aggregate_form(), moe: Some(out), fcn: None })
            }
            Head::Fcn(head) => {
                let out = head.forward(g, &self.store, &pyr)?;
                Ok(ModelOutput { scores: out.fusion.a8, form: ScoreForm::Logits, moe: None, fcn: Some(out) })
            }
        }
    }

    /// Training loss against full-resolution labels; head maps are bilinearly
    /// upsampled by [`HEAD_STRIDE`] first.
    pub fn loss(&self, g: &mut Graph<S>, out: &ModelOutput, labels: &LabelMap) -> Result<Var> {
        match &out.moe {
            Some(moe) => moe_loss(g, labels, moe, out.form, self.config.term_form, HEAD_STRIDE),
            None => {
                let up = g.upsample(out.scores, HEAD_STRIDE)?;
                g.phi_loss(up, labels, out.form)
            }
        }
    }

    /// Runs inference on `image` (N, 3, H, W).
    pub fn predict(&self, image: &Tensor<S>) -> Result<Prediction<S>> {
        let mut g = Graph::new();
        let x = g.constant(image.clone());
        let out = self.forward(&mut g, x)?;
        let up = g.upsample(out.scores, HEAD_STRIDE)?;
        let probs = match out.form {
            ScoreForm::Logits => g.softmax_channels(up)?,
            _ => up,
        };
        let probs = g.value(probs).clone();
        Ok(Prediction { labels: probs.argmax_channels(), probs })
    }

    /// Named weight maps at head resolution: `gate_expert{i}` for gated MoE
    /// models, `ahfa_w{8,16,32}` for FCN-AHFA.
    pub fn weight_maps(&self, image: &Tensor<S>) -> Result<Vec<(String, Tensor<S>)>> {
        let mut g = Graph::new();
        let x = g.constant(image.clone());
        let out = self.forward(&mut g, x)?;
        if let (Some(moe), true) = (&out.moe, self.kind.gating().is_some() && self.stage == 2) {
            return Ok(moe.gate_maps.iter().enumerate().map(|(i, v)| (format!("gate_expert{i}"), g.value(*v).clone())).collect());
        }
        if let Some(w) = out.fcn.as_ref().and_then(|f| f.fusion.weights.filter(|_| self.stage == 2)) {
            return Ok(vec![
                ("ahfa_w8".to_string(), g.value(w.w8).clone()),
                ("ahfa_w16".to_string(), g.value(w.w16).clone()),
                ("ahfa_w32".to_string(), g.value(w.w32).clone()),
            ]);
        }
        Err(Error::Usage(format!("{} (stage {}) has no learned weight maps", self.kind, self.stage)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    fn small_config() -> ModelConfig {
        ModelConfig { backbone_widths: [4, 4, 8, 8, 8], expert_hidden: 8, gating_hidden: 8, ..ModelConfig::default() }
    }

    #[test]
    fn every_kind_runs_forward_and_loss() {
        let image = Tensor::<f64>::from_fn(Shape::new(2, 3, 32, 32), |[n, c, h, w]| ((n + c * 3 + h * 7 + w * 13) % 17) as f64 / 17.0);
        let labels = LabelMap::new(Shape::new(2, 1, 32, 32), (0..2048).map(|i| (i % 5) as u16).collect(), 255).unwrap();
        for kind in ModelKind::ALL {
            let mut m = Model::<f64>::new(kind, small_config(), 3).unwrap();
            m.attach_stage2(3).unwrap();
            let mut g = Graph::new();
            let x = g.constant(image.clone());
            let out = m.forward(&mut g, x).unwrap();
            assert_eq!(g.shape(out.scores), Shape::new(2, 5, 4, 4), "{kind}");
            let loss = m.loss(&mut g, &out, &labels).unwrap();
            assert!(g.value(loss).data()[0].is_finite());
            let p = m.predict(&image).unwrap();
            assert_eq!(p.labels.len(), 2048);
            assert_eq!(m.weight_maps(&image).is_ok(), kind.is_adaptive(), "{kind}");
        }
    }

    #[test]
    fn stage2_adds_parameters_only_for_adaptive_kinds() {
        for kind in ModelKind::ALL {
            let mut m = Model::<f32>::new(kind, small_config(), 0).unwrap();
            let before = m.store.len();
            m.attach_stage2(0).unwrap();
            assert_eq!(m.store.len() > before, kind.is_adaptive(), "{kind}");
            assert_eq!(m.stage2_params().len(), m.store.len() - before);
            assert!(m.attach_stage2(0).is_err());
        }
    }

    #[test]
    fn rebuild_from_store_checks_completeness() {
        let m = Model::<f32>::new(ModelKind::MoeSpnet, small_config(), 1).unwrap();
        let rebuilt = Model::from_store(ModelKind::MoeSpnet, small_config(), 1, m.store.clone()).unwrap();
        assert_eq!(rebuilt.store.len(), m.store.len());
        assert!(Model::from_store(ModelKind::MoeSpnet, small_config(), 2, m.store.clone()).is_err());
    }
}
