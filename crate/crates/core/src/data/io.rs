//! Sample files and dataset directories.
//!
//! A sample `k` of split `s` lives at `{root}/{s}/{k}.sptn` (image) and
//! `{root}/{s}/{k}.splb` (labels); `{root}/dataset.json` lists the splits.
//!
//! SPLB layout (little-endian): magic `53 50 4C 42`, u16 version (1), u8
//! ignore code, u32 height, u32 width, then u16 labels row-major.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::scene::{generate_scene, SceneSpec};
use crate::error::{Error, Result};
use crate::labels::LabelMap;
use crate::sptn::{self, check_magic, read_u16, read_u32};
use crate::tensor::{Shape, Tensor};

pub const SPLB_MAGIC: [u8; 4] = *b"SPLB";
pub const SPLB_VERSION: u16 = 1;
const SPLB_HEADER: usize = 4 + 2 + 1 + 8;

pub fn encode_labels(l: &LabelMap) -> Result<Vec<u8>> {
    let s = l.shape();
    if s.batch() != 1 {
        return Err(Error::Contract(format!("SPLB stores one label map, got batch {}", s.batch())));
    }
    let ignore = u8::try_from(l.ignore)
        .map_err(|_| Error::Contract(format!("ignore label {} does not fit the u8 ignore code", l.ignore)))?;
    let mut out = Vec::with_capacity(SPLB_HEADER + 2 * s.plane());
    out.extend_from_slice(&SPLB_MAGIC);
    out.extend_from_slice(&SPLB_VERSION.to_le_bytes());
    out.push(ignore);
    out.extend_from_slice(&(s.height() as u32).to_le_bytes());
    out.extend_from_slice(&(s.width() as u32).to_le_bytes());
    for v in l.labels() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_labels(bytes: &[u8]) -> Result<LabelMap> {
    check_magic(bytes, &SPLB_MAGIC)?;
    let version = read_u16(bytes, 4, "version")?;
    if version != SPLB_VERSION {
        return Err(Error::Format { offset: 4, msg: format!("unsupported SPLB version {version}") });
    }
    if bytes.len() < 7 {
        return Err(Error::Format { offset: bytes.len(), msg: "truncated while reading ignore code".into() });
    }
    let ignore = bytes[6] as u16;
    let h = read_u32(bytes, 7, "height")? as usize;
    let w = read_u32(bytes, 11, "width")? as usize;
    let body = &bytes[SPLB_HEADER..];
    if body.len() < 2 * h * w {
        return Err(Error::Format {
            offset: bytes.len(),
            msg: format!("truncated label body: need {} bytes for {h}x{w}", SPLB_HEADER + 2 * h * w),
        });
    }
    if body.len() > 2 * h * w {
        return Err(Error::Format { offset: SPLB_HEADER + 2 * h * w, msg: "trailing bytes after label body".into() });
    }
    let labels = body.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
    LabelMap::new(Shape::new(1, 1, h, w), labels, ignore)
}

pub fn write_labels(path: impl AsRef<Path>, l: &LabelMap) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_labels(l)?).map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    decode_labels(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Writes `{stem}.sptn` and `{stem}.splb`.
pub fn write_sample(stem: impl AsRef<Path>, image: &Tensor<f32>, labels: &LabelMap) -> Result<()> {
    let stem = stem.as_ref();
    sptn::write(stem.with_extension("sptn"), image)?;
    write_labels(stem.with_extension("splb"), labels)
}

pub fn read_sample(stem: impl AsRef<Path>) -> Result<(Tensor<f32>, LabelMap)> {
    let stem = stem.as_ref();
    let image: Tensor<f32> = sptn::read(stem.with_extension("sptn"))?;
    let labels = read_labels(stem.with_extension("splb"))?;
    let (is, ls) = (image.shape(), labels.shape());
    if is.batch() != 1 || is.height() != ls.height() || is.width() != ls.width() {
        return Err(Error::Data(format!("{}: image {is} does not match labels {ls}", stem.display())));
    }
    Ok((image, labels))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitInfo {
    pub name: String,
    /// Scene index of the split's sample 0.
    pub first_index: u64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    pub classes: usize,
    pub ignore_label: u16,
    pub scene: SceneSpec,
    pub splits: Vec<SplitInfo>,
}

impl DatasetManifest {
    /// Train scenes take indices `0..train`, validation scenes follow.
    pub fn standard(scene: SceneSpec, train: usize, val: usize) -> Self {
        DatasetManifest {
            version: 1,
            classes: scene.classes,
            ignore_label: crate::labels::DEFAULT_IGNORE,
            scene,
            splits: vec![
                SplitInfo { name: "train".into(), first_index: 0, count: train },
                SplitInfo { name: "val".into(), first_index: train as u64, count: val },
            ],
        }
    }

    pub fn split(&self, name: &str) -> Result<&SplitInfo> {
        self.splits
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Data(format!("dataset has no split named {name:?}")))
    }

    pub fn read(root: impl AsRef<Path>) -> Result<Self> {
        let path = root.as_ref().join("dataset.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Samples held in memory, one image and label map per entry.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub images: Vec<Tensor<f32>>,
    pub labels: Vec<LabelMap>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn synthesize(spec: &SceneSpec, first_index: u64, count: usize) -> Result<Self> {
        let mut d = Dataset::default();
        for k in 0..count as u64 {
            let (x, l) = generate_scene(spec, first_index + k)?;
            d.images.push(x);
            d.labels.push(l);
        }
        Ok(d)
    }

    /// Generates every split of `manifest` and writes it under `root`.
    pub fn write_all(root: impl AsRef<Path>, manifest: &DatasetManifest) -> Result<()> {
        let root = root.as_ref();
        for split in &manifest.splits {
            let dir = root.join(&split.name);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            for k in 0..split.count {
                let (x, mut l) = generate_scene(&manifest.scene, split.first_index + k as u64)?;
                l.ignore = manifest.ignore_label;
                write_sample(dir.join(k.to_string()), &x, &l)?;
            }
        }
        let path = root.join("dataset.json");
        let text = serde_json::to_string_pretty(manifest)?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(root: impl AsRef<Path>, split: &str) -> Result<(Self, DatasetManifest)> {
        let root = root.as_ref();
        let manifest = DatasetManifest::read(root)?;
        let info = manifest.split(split)?;
        let mut d = Dataset::default();
        for k in 0..info.count {
            let (x, l) = read_sample(sample_stem(root, split, k))?;
            l.validate(manifest.classes)?;
            d.images.push(x);
            d.labels.push(l);
        }
        Ok((d, manifest))
    }
}

pub fn sample_stem(root: &Path, split: &str, index: usize) -> PathBuf {
    root.join(split).join(index.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> LabelMap {
        LabelMap::new(Shape::new(1, 1, 2, 3), vec![0, 1, 255, 4, 3, 2], 255).unwrap()
    }

    #[test]
    fn splb_round_trip_and_layout() {
        let l = labels();
        let bytes = encode_labels(&l).unwrap();
        assert_eq!(&bytes[..4], &[0x53, 0x50, 0x4C, 0x42]);
        assert_eq!(bytes[6], 255);
        assert_eq!(&bytes[7..11], &2u32.to_le_bytes());
        assert_eq!(bytes.len(), SPLB_HEADER + 12);
        assert_eq!(decode_labels(&bytes).unwrap(), l);
    }

    #[test]
    fn splb_errors_carry_offsets() {
        let bytes = encode_labels(&labels()).unwrap();
        match decode_labels(&bytes[..bytes.len() - 1]) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, bytes.len() - 1),
            other => panic!("{other:?}"),
        }
        match decode_labels(&bytes[..9]) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 9),
            other => panic!("{other:?}"),
        }
        let mut bad = bytes.clone();
        bad[3] = b'X';
        assert!(matches!(decode_labels(&bad), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn wide_ignore_is_rejected() {
        let mut l = labels();
        l.ignore = 300;
        assert!(encode_labels(&l).is_err());
    }

    #[test]
    fn dataset_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = DatasetManifest::standard(SceneSpec::default(), 3, 2);
        Dataset::write_all(dir.path(), &manifest).unwrap();
        assert!(dir.path().join("train/2.sptn").exists());
        assert!(dir.path().join("val/1.splb").exists());
        let (val, m) = Dataset::load(dir.path(), "val").unwrap();
        assert_eq!(m, manifest);
        let fresh = Dataset::synthesize(&manifest.scene, 3, 2).unwrap();
        for k in 0..2 {
            assert_eq!(val.labels[k], fresh.labels[k]);
            assert!(val.images[k].data().iter().zip(fresh.images[k].data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
        assert!(Dataset::load(dir.path(), "test").is_err());
    }
}
