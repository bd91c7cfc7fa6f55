use crate::error::{shape_err, Error, Result};
use crate::tensor::Shape;

pub const DEFAULT_IGNORE: u16 = 255;

/// Per-pixel class ids with shape (N, 1, H, W).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    shape: Shape,
    labels: Vec<u16>,
    pub ignore: u16,
}

impl LabelMap {
    pub fn new(shape: Shape, labels: Vec<u16>, ignore: u16) -> Result<Self> {
        if shape.channels() != 1 {
            return Err(shape_err!("label maps have one channel, got {shape}"));
        }
        if labels.len() != shape.numel() {
            return Err(shape_err!(
                "{} labels for shape {shape}",
                labels.len()
            ));
        }
        Ok(LabelMap {
            shape,
            labels,
            ignore,
        })
    }

    pub fn filled(shape: Shape, value: u16, ignore: u16) -> Self {
        LabelMap {
            shape,
            labels: vec![value; shape.numel()],
            ignore,
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u16] {
        &mut self.labels
    }

    pub fn at(&self, n: usize, h: usize, w: usize) -> u16 {
        self.labels[self.shape.index(n, 0, h, w)]
    }

    /// Checks every non-ignored label is below `classes`.
    pub fn validate(&self, classes: usize) -> Result<()> {
        for (i, &l) in self.labels.iter().enumerate() {
            if l != self.ignore && l as usize >= classes {
                return Err(Error::Data(format!(
                    "label {l} at pixel {i} out of range for {classes} classes"
                )));
            }
        }
        Ok(())
    }

    pub fn batch_item(&self, n: usize) -> LabelMap {
        let per = self.shape.plane();
        LabelMap {
            shape: Shape::new(1, 1, self.shape.height(), self.shape.width()),
            labels: self.labels[n * per..(n + 1) * per].to_vec(),
            ignore: self.ignore,
        }
    }

    pub fn stack(items: &[LabelMap]) -> Result<LabelMap> {
        let first = items
            .first()
            .ok_or_else(|| shape_err!("cannot stack zero label maps"))?;
        let mut labels = Vec::new();
        let mut n = 0;
        for m in items {
            if m.shape.plane() != first.shape.plane() || m.shape.height() != first.shape.height() {
                return Err(shape_err!("stack: {} vs {}", first.shape, m.shape));
            }
            n += m.shape.batch();
            labels.extend_from_slice(&m.labels);
        }
        LabelMap::new(
            Shape::new(n, 1, first.shape.height(), first.shape.width()),
            labels,
            first.ignore,
        )
    }
}
