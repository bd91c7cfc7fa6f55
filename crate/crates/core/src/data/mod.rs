//! Synthetic scenes, augmentation and on-disk samples.

pub mod augment;
pub mod io;
pub mod scene;

pub use augment::{augment, augment_with, AugmentParams, SCALES};
pub use io::{read_labels, read_sample, write_labels, write_sample, Dataset, DatasetManifest};
pub use scene::{generate_scene, SceneSpec};
