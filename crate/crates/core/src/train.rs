//! Two-stage training loop and evaluation.
//!
//! The batch used at global step `t` is a pure function of (seed, t), where stage
//! 2 continues the step count of stage 1. Running the stages separately or
//! chained therefore sees identical data.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::config::TrainConfig;
use crate::data::{augment, Dataset};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::labels::LabelMap;
use crate::metrics::ConfusionMatrix;
use crate::model::Model;
use crate::optim::SgdState;
use crate::rng::derive_rng;
use crate::tensor::Tensor;

const DATA_STREAM: u64 = 0xDA7A;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRow {
    pub iter: usize,
    pub lr: f64,
    pub loss: f64,
}

/// Writes `iter,lr,loss` rows.
pub fn write_loss_csv(path: impl AsRef<Path>, rows: &[LossRow]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("iter,lr,loss\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.iter, r.lr, r.loss));
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// The training batch for global step `step`.
pub fn batch_at(data: &Dataset, cfg: &TrainConfig, crop: usize, step: u64) -> Result<(Tensor<f32>, LabelMap)> {
    if data.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }
    let mut rng = derive_rng(cfg.seed, DATA_STREAM, step);
    let mut images = Vec::with_capacity(cfg.batch);
    let mut labels = Vec::with_capacity(cfg.batch);
    for _ in 0..cfg.batch {
        let k = rng.gen_range(0..data.len());
        let (x, l) = if cfg.augment {
            augment(&data.images[k], &data.labels[k], &mut rng, crop)
        } else {
            let p = crate::data::AugmentParams { scale: 1.0, flip: false, top: 0, left: 0 };
            crate::data::augment_with(&data.images[k], &data.labels[k], &p, crop)
        };
        images.push(x);
        labels.push(l);
    }
    Ok((Tensor::stack(&images)?, LabelMap::stack(&labels)?))
}

/// Loss on one batch; with `step` set, also backpropagates and applies one SGD step.
fn batch_loss(model: &mut Model<f32>, image: Tensor<f32>, labels: &LabelMap, step: Option<&mut SgdState<f32>>) -> Result<f64> {
    let mut g = Graph::new();
    let x = g.constant(image);
    let out = model.forward(&mut g, x)?;
    let loss = model.loss(&mut g, &out, labels)?;
    let value = g.value(loss).data()[0] as f64;
    if !value.is_finite() {
        return Err(Error::Contract(format!("loss became non-finite ({value})")));
    }
    if let Some(sgd) = step {
        model.store.zero_grad();
        g.backward_into(loss, &mut model.store)?;
        sgd.step(&mut model.store)?;
    }
    Ok(value)
}

/// Trains `model` for `iters` steps starting at global step `first_step`.
///
/// Row `i < iters` holds the loss before step `i` and the learning rate used by
/// it. A final row `iters` (lr 0, no step) holds the loss of the trained model on
/// the batch of global step `first_step + iters`, which is the batch a following
/// stage starts with.
pub fn train_stage(model: &mut Model<f32>, data: &Dataset, cfg: &TrainConfig, iters: usize, first_step: u64) -> Result<Vec<LossRow>> {
    let mut sgd = SgdState::new(cfg.sgd(model.kind.family(), iters))?;
    for id in model.stage2_params() {
        sgd.set_lr_mult(id, cfg.new_layer_lr_mult);
    }
    let crop = model.config.crop;
    let mut rows = Vec::with_capacity(iters + 1);
    for i in 0..iters {
        let (x, l) = batch_at(data, cfg, crop, first_step + i as u64)?;
        let lr = sgd.lr();
        let loss = batch_loss(model, x, &l, Some(&mut sgd))?;
        if i % 100 == 0 {
            log::debug!("{} stage {} iter {i} lr {lr:.5} loss {loss:.5}", model.kind, model.stage);
        }
        rows.push(LossRow { iter: i, lr, loss });
    }
    let (x, l) = batch_at(data, cfg, crop, first_step + iters as u64)?;
    let loss = batch_loss(model, x, &l, None)?;
    rows.push(LossRow { iter: iters, lr: 0.0, loss });
    Ok(rows)
}

/// Confusion matrix of `model` over every sample of `data`.
pub fn evaluate(model: &Model<f32>, data: &Dataset) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(model.config.classes);
    for (x, l) in data.images.iter().zip(&data.labels) {
        let p = model.predict(x)?;
        cm.accumulate(&p.labels, l.labels(), l.ignore)?;
    }
    Ok(cm)
}
