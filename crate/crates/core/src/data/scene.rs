//! Synthetic texture-vs-shape scenes.
//!
//! Textured classes are recognizable from a few pixels (fine checkerboard or
//! binary noise); shape classes share one flat colour and differ only in their
//! silhouette (rectangle or triangle), so telling them apart takes a wide
//! receptive field.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{LabelMap, DEFAULT_IGNORE};
use crate::rng::derive_rng;
use crate::tensor::{Shape, Tensor};

const SCENE_STREAM: u64 = 0x5C3E;

pub const BACKGROUND: u16 = 0;
pub const TEXTURE_CHECKER: u16 = 1;
pub const TEXTURE_NOISE: u16 = 2;
pub const SHAPE_RECT: u16 = 3;
pub const SHAPE_TRIANGLE: u16 = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub canvas: usize,
    /// 2..=5; classes above this count are never drawn.
    pub classes: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    /// Checkerboard cell size in pixels.
    pub texture_period: usize,
    pub min_size: usize,
    pub max_size: usize,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            canvas: 64,
            classes: 5,
            min_objects: 2,
            max_objects: 4,
            texture_period: 2,
            min_size: 16,
            max_size: 32,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.canvas < 32 {
            return Err(Error::Config(format!("canvas {} is smaller than 32", self.canvas)));
        }
        if !(2..=5).contains(&self.classes) {
            return Err(Error::Config(format!("scene classes must be in 2..=5, got {}", self.classes)));
        }
        if self.min_objects > self.max_objects || self.min_size == 0 || self.min_size > self.max_size || self.texture_period == 0 {
            return Err(Error::Config(format!("inconsistent scene spec {self:?}")));
        }
        Ok(())
    }
}

const BG: [f32; 3] = [0.30, 0.35, 0.40];
const SOLID: [f32; 3] = [0.80, 0.70, 0.45];
const DARK: [f32; 3] = [0.15, 0.20, 0.15];
const LIGHT: [f32; 3] = [0.70, 0.85, 0.60];

/// Renders scene `index`: a (1, 3, S, S) image in [0, 1] and its (1, 1, S, S) labels.
pub fn generate_scene(spec: &SceneSpec, index: u64) -> Result<(Tensor<f32>, LabelMap)> {
    spec.validate()?;
    let mut rng = derive_rng(spec.seed, SCENE_STREAM, index);
    let s = spec.canvas;
    let mut labels = vec![BACKGROUND; s * s];
    let mut pixels = vec![BG; s * s];
    // gentle horizontal/vertical shading on the background
    let (gx, gy): (f32, f32) = (rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
    for i in 0..s {
        for j in 0..s {
            let shade = gx * (j as f32 / s as f32 - 0.5) + gy * (i as f32 / s as f32 - 0.5);
            pixels[i * s + j] = BG.map(|c| c + shade);
        }
    }

    let count = rng.gen_range(spec.min_objects..=spec.max_objects);
    for _ in 0..count {
        let class = rng.gen_range(1..spec.classes as u16);
        let size = rng.gen_range(spec.min_size..=spec.max_size.min(s));
        let (h, w) = match class {
            SHAPE_RECT | SHAPE_TRIANGLE => (size, size),
            _ => (size, rng.gen_range(spec.min_size..=spec.max_size.min(s))),
        };
        let top = rng.gen_range(0..=s - h);
        let left = rng.gen_range(0..=s - w);
        let phase = rng.gen_range(0..2 * spec.texture_period);
        let noise_seed: u64 = rng.gen();
        let mut noise = derive_rng(noise_seed, 1, 0);
        for i in top..top + h {
            for j in left..left + w {
                let (u, v) = (i - top, j - left);
                let inside = match class {
                    SHAPE_RECT => true,
                    // apex at the top centre, base along the bottom row
                    SHAPE_TRIANGLE => {
                        let half = (u as f32 + 1.0) / h as f32 * (w as f32 / 2.0);
                        ((v as f32 + 0.5) - w as f32 / 2.0).abs() <= half
                    }
                    // textured regions are ellipses
                    _ => {
                        let dy = (u as f32 + 0.5) / h as f32 * 2.0 - 1.0;
                        let dx = (v as f32 + 0.5) / w as f32 * 2.0 - 1.0;
                        dx * dx + dy * dy <= 1.0
                    }
                };
                let bit: bool = if class == TEXTURE_NOISE { noise.gen() } else { false };
                if !inside {
                    continue;
                }
                let colour = match class {
                    TEXTURE_CHECKER => {
                        let p = spec.texture_period;
                        if ((i + phase) / p + (j + phase) / p) % 2 == 0 {
                            LIGHT
                        } else {
                            DARK
                        }
                    }
                    TEXTURE_NOISE => {
                        if bit {
                            LIGHT
                        } else {
                            DARK
                        }
                    }
                    _ => SOLID,
                };
                labels[i * s + j] = class;
                pixels[i * s + j] = colour;
            }
        }
    }

    let image = Tensor::from_fn(Shape::new(1, 3, s, s), |[_, c, i, j]| pixels[i * s + j][c]);
    let labels = LabelMap::new(Shape::new(1, 1, s, s), labels, DEFAULT_IGNORE)?;
    Ok((image, labels))
}
