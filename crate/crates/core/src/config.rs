//! Run configuration, parsed from a single JSON file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::ScoreForm;
use crate::moe::{AggregationForm, GatingKind};
use crate::optim::SgdConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Mixture of experts with prediction-based gating.
    #[default]
    MoeSpnet,
    /// Mixture of experts gated on the shared input features.
    MoeSpnetCf,
    /// Mixture of experts gated on the concatenated expert features.
    MoeSpnetEf,
    /// Experts averaged with uniform weights.
    DeeplabAsppBaseline,
    /// FCN-style fusion with learned per-level weight maps.
    FcnAhfa,
    /// FCN-style plain upsample-and-sum fusion.
    FcnBaseline,
}

/// Models sharing a stage-1 network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Moe,
    Fcn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::MoeSpnet,
        ModelKind::MoeSpnetCf,
        ModelKind::MoeSpnetEf,
        ModelKind::DeeplabAsppBaseline,
        ModelKind::FcnAhfa,
        ModelKind::FcnBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::MoeSpnet => "moe-spnet",
            ModelKind::MoeSpnetCf => "moe-spnet-cf",
            ModelKind::MoeSpnetEf => "moe-spnet-ef",
            ModelKind::DeeplabAsppBaseline => "deeplab-aspp-baseline",
            ModelKind::FcnAhfa => "fcn-ahfa",
            ModelKind::FcnBaseline => "fcn-baseline",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown model kind {s:?}")))
    }

    pub fn family(self) -> Family {
        match self {
            ModelKind::FcnAhfa | ModelKind::FcnBaseline => Family::Fcn,
            _ => Family::Moe,
        }
    }

    /// Gating variant for the gated MoE models.
    pub fn gating(self) -> Option<GatingKind> {
        match self {
            ModelKind::MoeSpnet => Some(GatingKind::Predictions),
            ModelKind::MoeSpnetCf => Some(GatingKind::CommonFeatures),
            ModelKind::MoeSpnetEf => Some(GatingKind::ExpertFeatures),
            _ => None,
        }
    }

    /// Whether stage 2 adds a learned weighting head.
    pub fn is_adaptive(self) -> bool {
        self.gating().is_some() || self == ModelKind::FcnAhfa
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of classes L.
    pub classes: usize,
    pub dilations: Vec<usize>,
    /// Expert hidden width C2.
    pub expert_hidden: usize,
    /// Gating hidden width C4 (CF/EF variants, and P with `gating_two_layer`).
    pub gating_hidden: usize,
    pub gating_two_layer: bool,
    pub zero_init_gating: bool,
    pub aggregation: AggregationForm,
    /// Score form used for the weighted expert terms of the MoE loss.
    pub term_form: ScoreForm,
    /// Initial bias of the AHFA weight heads (their kernels start at zero).
    pub ahfa_init_bias: f64,
    pub backbone_widths: [usize; 5],
    pub crop: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            classes: 5,
            dilations: vec![6, 12, 18, 24],
            expert_hidden: 64,
            gating_hidden: 64,
            gating_two_layer: false,
            zero_init_gating: true,
            aggregation: AggregationForm::Probability,
            term_form: ScoreForm::Probabilities,
            ahfa_init_bias: 0.0,
            backbone_widths: [8, 16, 32, 64, 128],
            crop: 64,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {}", self.classes)));
        }
        if self.dilations.is_empty() || self.dilations.contains(&0) {
            return Err(Error::Config(format!("dilations must be a non-empty list of positive rates, got {:?}", self.dilations)));
        }
        if self.expert_hidden == 0 || self.gating_hidden == 0 || self.backbone_widths.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if self.crop == 0 || self.crop % 32 != 0 {
            return Err(Error::Config(format!("crop {} is not a positive multiple of 32", self.crop)));
        }
        if !self.ahfa_init_bias.is_finite() {
            return Err(Error::Config("ahfa_init_bias must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// `None` picks the family default, see [`TrainConfig::base_lr_for`].
    pub base_lr: Option<f64>,
    pub momentum: f64,
    pub weight_decay: f64,
    pub power: f64,
    pub stage1_iters: usize,
    pub stage2_iters: usize,
    pub batch: usize,
    pub seed: u64,
    pub augment: bool,
    /// Learning-rate multiplier for the layers stage 2 adds.
    pub new_layer_lr_mult: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            base_lr: None,
            momentum: 0.9,
            weight_decay: 0.0005,
            power: 0.9,
            stage1_iters: 2000,
            stage2_iters: 1000,
            batch: 2,
            seed: 0,
            augment: true,
            new_layer_lr_mult: 10.0,
        }
    }
}

pub const FCN_BASE_LR: f64 = 0.01;
/// The MoE loss sums N + 1 cross-entropy terms, so it takes a smaller step.
pub const MOE_BASE_LR: f64 = 0.002;

impl TrainConfig {
    pub fn base_lr_for(&self, family: Family) -> f64 {
        self.base_lr.unwrap_or(match family {
            Family::Fcn => FCN_BASE_LR,
            Family::Moe => MOE_BASE_LR,
        })
    }

    pub fn sgd(&self, family: Family, max_iter: usize) -> SgdConfig {
        SgdConfig {
            base_lr: self.base_lr_for(family),
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            power: self.power,
            max_iter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.new_layer_lr_mult > 0.0 && self.new_layer_lr_mult.is_finite()) {
            return Err(Error::Config("new_layer_lr_mult must be positive".into()));
        }
        if self.batch == 0 {
            return Err(Error::Config("batch must be positive".into()));
        }
        for family in [Family::Moe, Family::Fcn] {
            self.sgd(family, self.stage1_iters).validate()?;
            self.sgd(family, self.stage2_iters).validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    pub model_config: ModelConfig,
    pub train: TrainConfig,
    pub paths: Paths,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.model_config.validate()?;
        self.train.validate()
    }
}
