//! Paired comparison of an adaptive model against its baseline.
//!
//! Both models start from one shared stage-1 network and see the same stage-2
//! batches, so the only difference between them is the learned weighting head.

use std::time::{Duration, Instant};

use crate::config::{ModelConfig, ModelKind, TrainConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::ZeroDenominator;
use crate::model::Model;
use crate::train::{evaluate, train_stage};

#[derive(Clone, Debug)]
pub struct PairedRun {
    pub seed: u64,
    pub adaptive: ModelKind,
    pub baseline: ModelKind,
    pub stage1_miou: f64,
    pub adaptive_miou: f64,
    pub baseline_miou: f64,
    /// Loss of the stage-1 network after training and first stage-2 loss of the adaptive model.
    pub stage1_final_loss: f64,
    pub stage2_first_loss: f64,
    pub elapsed: Duration,
}

impl PairedRun {
    pub fn margin(&self) -> f64 {
        self.adaptive_miou - self.baseline_miou
    }
}

/// The uniform-weight counterpart of an adaptive model kind.
pub fn baseline_of(kind: ModelKind) -> Result<ModelKind> {
    match kind {
        ModelKind::MoeSpnet | ModelKind::MoeSpnetCf | ModelKind::MoeSpnetEf => Ok(ModelKind::DeeplabAsppBaseline),
        ModelKind::FcnAhfa => Ok(ModelKind::FcnBaseline),
        other => Err(Error::Usage(format!("{other} is already a baseline"))),
    }
}

fn miou(model: &Model<f32>, val: &Dataset) -> Result<f64> {
    evaluate(model, val)?.mean_iou(ZeroDenominator::Exclude)
}

/// Stage 1 once, then stage 2 for `adaptive` and for its baseline; validation
/// mean IoU of each.
pub fn paired_run(
    adaptive: ModelKind,
    config: &ModelConfig,
    train_cfg: &TrainConfig,
    train: &Dataset,
    val: &Dataset,
) -> Result<PairedRun> {
    let start = Instant::now();
    let baseline = baseline_of(adaptive)?;
    let mut stage1 = Model::<f32>::new(baseline, config.clone(), train_cfg.seed)?;
    let rows = train_stage(&mut stage1, train, train_cfg, train_cfg.stage1_iters, 0)?;
    let stage1_final_loss = rows.last().map_or(f64::NAN, |r| r.loss);
    let stage1_miou = miou(&stage1, val)?;
    let mut result = [0.0; 2];
    let mut stage2_first_loss = f64::NAN;
    for (slot, kind) in [adaptive, baseline].into_iter().enumerate() {
        let mut model = Model::from_store(kind, config.clone(), 1, stage1.store.clone())?;
        model.attach_stage2(train_cfg.seed)?;
        let rows = train_stage(&mut model, train, train_cfg, train_cfg.stage2_iters, train_cfg.stage1_iters as u64)?;
        if slot == 0 {
            stage2_first_loss = rows[0].loss;
        }
        result[slot] = miou(&model, val)?;
    }
    Ok(PairedRun {
        seed: train_cfg.seed,
        adaptive,
        baseline,
        stage1_miou,
        adaptive_miou: result[0],
        baseline_miou: result[1],
        stage1_final_loss,
        stage2_first_loss,
        elapsed: start.elapsed(),
    })
}
