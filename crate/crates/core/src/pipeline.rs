//! Stage-level training runs that read and write checkpoint directories.
//!
//! Layout under a run directory `out`:
//! `stage1/` and `stage2/` (checkpoints), `stage1_loss.csv`, `stage2_loss.csv`.

use std::path::{Path, PathBuf};

use crate::checkpoint::{self, CheckpointManifest};
use crate::config::RunConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::train::{train_stage, write_loss_csv, LossRow};

pub fn stage_dir(out: &Path, stage: u8) -> PathBuf {
    out.join(format!("stage{stage}"))
}

pub fn loss_log(out: &Path, stage: u8) -> PathBuf {
    out.join(format!("stage{stage}_loss.csv"))
}

/// Trains the stage-1 (baseline-head) network of `cfg.model` and saves it.
pub fn run_stage1(cfg: &RunConfig, data: &Dataset, out: &Path) -> Result<Vec<LossRow>> {
    let mut model = Model::<f32>::new(cfg.model, cfg.model_config.clone(), cfg.train.seed)?;
    log::info!("stage 1: {} with {} parameters", cfg.model, model.store.total_elements());
    let rows = train_stage(&mut model, data, &cfg.train, cfg.train.stage1_iters, 0)?;
    checkpoint::save(stage_dir(out, 1), &model)?;
    write_loss_csv(loss_log(out, 1), &rows)?;
    Ok(rows)
}

/// Loads the stage-1 checkpoint in `from`, attaches the stage-2 heads of
/// `cfg.model`, fine-tunes and saves to `out/stage2`.
pub fn run_stage2(cfg: &RunConfig, data: &Dataset, from: &Path, out: &Path) -> Result<Vec<LossRow>> {
    let manifest = CheckpointManifest::read(from).map_err(|e| match e {
        Error::Io { .. } => Error::Usage(format!("stage 2 needs a stage-1 checkpoint, none found in {}", from.display())),
        other => other,
    })?;
    if manifest.stage != 1 {
        return Err(Error::Usage(format!("{} holds a stage-{} checkpoint, stage 2 starts from stage 1", from.display(), manifest.stage)));
    }
    let mut model = checkpoint::load_as::<f32>(from, &manifest, cfg.model, &cfg.model_config)?;
    model.attach_stage2(cfg.train.seed)?;
    log::info!("stage 2: {} with {} parameters", cfg.model, model.store.total_elements());
    let rows = train_stage(&mut model, data, &cfg.train, cfg.train.stage2_iters, cfg.train.stage1_iters as u64)?;
    checkpoint::save(stage_dir(out, 2), &model)?;
    write_loss_csv(loss_log(out, 2), &rows)?;
    Ok(rows)
}
