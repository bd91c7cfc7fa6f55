//! Checkpoints: a directory of SPTN parameter files plus `manifest.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{ModelConfig, ModelKind};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::scalar::Scalar;
use crate::sptn;

pub const MANIFEST: &str = "manifest.json";
const FORMAT: &str = "spnet-checkpoint";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub format: String,
    pub version: u32,
    pub model: ModelKind,
    pub stage: u8,
    pub model_config: ModelConfig,
    /// Parameter name to file name, relative to the checkpoint directory.
    pub parameters: BTreeMap<String, String>,
}

impl CheckpointManifest {
    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: CheckpointManifest =
            serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        if m.format != FORMAT || m.version != 1 {
            return Err(Error::Data(format!("{}: not a version-1 {FORMAT} manifest", path.display())));
        }
        Ok(m)
    }
}

pub fn save<S: Scalar>(dir: impl AsRef<Path>, model: &Model<S>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut parameters = BTreeMap::new();
    for (_, name, t) in model.store.iter() {
        let file = format!("{name}.sptn");
        sptn::write(dir.join(&file), t)?;
        parameters.insert(name.to_string(), file);
    }
    let manifest = CheckpointManifest {
        format: FORMAT.into(),
        version: 1,
        model: model.kind,
        stage: model.stage,
        model_config: model.config.clone(),
        parameters,
    };
    let path = dir.join(MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
}

/// Loads a checkpoint; every parameter of the described network must be present
/// and no unknown parameter may be listed.
pub fn load<S: Scalar>(dir: impl AsRef<Path>) -> Result<Model<S>> {
    let dir = dir.as_ref();
    let manifest = CheckpointManifest::read(dir)?;
    load_as(dir, &manifest, manifest.model, &manifest.model_config)
}

/// Like [`load`] but rebuilds the network as `kind` with `config`, which must
/// describe the same stage-1 structure (used to start any stage-2 model of a
/// family from a shared stage-1 checkpoint).
pub fn load_as<S: Scalar>(dir: &Path, manifest: &CheckpointManifest, kind: ModelKind, config: &ModelConfig) -> Result<Model<S>> {
    if kind.family() != manifest.model.family() {
        return Err(Error::Usage(format!("checkpoint holds a {} network, cannot load it as {kind}", manifest.model)));
    }
    let mut model = Model::<S>::new(kind, config.clone(), 0)?;
    if manifest.stage == 2 {
        if kind != manifest.model {
            return Err(Error::Usage(format!("stage-2 checkpoint of {} cannot be loaded as {kind}", manifest.model)));
        }
        model.attach_stage2(0)?;
    }
    if model.store.len() != manifest.parameters.len() {
        return Err(Error::Data(format!(
            "checkpoint lists {} parameters, {kind} stage {} has {}",
            manifest.parameters.len(),
            manifest.stage,
            model.store.len()
        )));
    }
    let ids: Vec<_> = model.store.ids().collect();
    for id in ids {
        let name = model.store.name(id).to_string();
        let file = manifest
            .parameters
            .get(&name)
            .ok_or_else(|| Error::Data(format!("checkpoint lacks parameter {name}")))?;
        let t = sptn::read::<S>(dir.join(file))?;
        model.store.set_values(id, t)?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Shape, Tensor};

    fn cfg() -> ModelConfig {
        ModelConfig { backbone_widths: [4, 4, 8, 8, 8], expert_hidden: 8, gating_hidden: 8, ..ModelConfig::default() }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Model::<f32>::new(ModelKind::MoeSpnetCf, cfg(), 9).unwrap();
        m.attach_stage2(9).unwrap();
        save(dir.path(), &m).unwrap();
        let back = load::<f32>(dir.path()).unwrap();
        assert_eq!(back.stage, 2);
        for (id, name, t) in m.store.iter() {
            assert_eq!(back.store.name(id), name);
            assert_eq!(back.store.get(id).data(), t.data());
        }
        let x = Tensor::<f32>::full(Shape::new(1, 3, 32, 32), 0.3);
        assert_eq!(m.predict(&x).unwrap().probs, back.predict(&x).unwrap().probs);
    }

    #[test]
    fn family_and_completeness_checked() {
        let dir = tempfile::tempdir().unwrap();
        let m = Model::<f32>::new(ModelKind::DeeplabAsppBaseline, cfg(), 1).unwrap();
        save(dir.path(), &m).unwrap();
        let manifest = CheckpointManifest::read(dir.path()).unwrap();
        assert!(load_as::<f32>(dir.path(), &manifest, ModelKind::MoeSpnetEf, &cfg()).is_ok());
        assert!(matches!(load_as::<f32>(dir.path(), &manifest, ModelKind::FcnAhfa, &cfg()), Err(Error::Usage(_))));
        let wider = ModelConfig { expert_hidden: 16, ..cfg() };
        assert!(matches!(load_as::<f32>(dir.path(), &manifest, ModelKind::MoeSpnet, &wider), Err(Error::Shape(_))));
        fs::remove_file(dir.path().join("moe.expert0.e1.bias.sptn")).unwrap();
        assert!(load::<f32>(dir.path()).is_err());
        assert!(load::<f32>(dir.path().join("missing")).is_err());
    }
}
