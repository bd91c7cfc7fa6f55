//! Confusion-matrix segmentation metrics: pixel accuracy, mean accuracy, mean
//! IoU and frequency-weighted IoU.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How classes whose denominator is zero enter the class averages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroDenominator {
    /// Drop the class and divide by the number of remaining classes.
    #[default]
    Exclude,
    /// Count the class as scoring 0 and keep dividing by L.
    CountAsZero,
}

/// `counts[i][j]`: pixels of true class `i` predicted as class `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub pixel_acc: f64,
    pub mean_acc: f64,
    pub mean_iou: f64,
    pub weighted_iou: f64,
    /// `None` for classes that never occur in prediction or ground truth.
    pub per_class_iou: Vec<Option<f64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != classes * classes {
            return Err(Error::Shape(format!("{} counts for {classes} classes", counts.len())));
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds one image (or batch) of predictions. `gt` pixels equal to `ignore` are
    /// skipped; any other label must be below L.
    pub fn accumulate(&mut self, pred: &[u16], gt: &[u16], ignore: u16) -> Result<()> {
        if pred.len() != gt.len() {
            return Err(Error::Shape(format!("{} predictions vs {} labels", pred.len(), gt.len())));
        }
        let l = self.classes;
        for (i, (&p, &t)) in pred.iter().zip(gt).enumerate() {
            if t == ignore {
                continue;
            }
            if t as usize >= l {
                return Err(Error::Data(format!("ground-truth label {t} at pixel {i} out of range for {l} classes")));
            }
            if p as usize >= l {
                return Err(Error::Data(format!("predicted label {p} at pixel {i} out of range for {l} classes")));
            }
            self.counts[t as usize * l + p as usize] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::Shape(format!("cannot merge {} and {} classes", self.classes, other.classes)));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    fn diag(&self, i: usize) -> f64 {
        self.get(i, i) as f64
    }

    fn row(&self, i: usize) -> f64 {
        (0..self.classes).map(|j| self.get(i, j) as f64).sum()
    }

    fn col(&self, i: usize) -> f64 {
        (0..self.classes).map(|j| self.get(j, i) as f64).sum()
    }

    fn checked_total(&self) -> Result<f64> {
        let n = self.total();
        if n == 0 {
            return Err(Error::UndefinedMetric("no evaluated pixels (N = 0)".into()));
        }
        Ok(n as f64)
    }

    fn class_mean(&self, ratios: impl Iterator<Item = Option<f64>>, policy: ZeroDenominator) -> f64 {
        let (mut sum, mut count) = (0.0, 0usize);
        for r in ratios {
            match (r, policy) {
                (Some(v), _) => {
                    sum += v;
                    count += 1;
                }
                (None, ZeroDenominator::CountAsZero) => count += 1,
                (None, ZeroDenominator::Exclude) => {}
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }

    /// (1/N) sum_i l_ii
    pub fn pixel_acc(&self) -> Result<f64> {
        let n = self.checked_total()?;
        Ok((0..self.classes).map(|i| self.diag(i)).sum::<f64>() / n)
    }

    /// (1/L) sum_i l_ii / sum_j l_ij
    pub fn mean_acc(&self, policy: ZeroDenominator) -> Result<f64> {
        self.checked_total()?;
        let ratios = (0..self.classes).map(|i| {
            let r = self.row(i);
            (r > 0.0).then(|| self.diag(i) / r)
        });
        Ok(self.class_mean(ratios, policy))
    }

    /// IoU of each class, `None` where the union is empty.
    pub fn class_iou(&self) -> Vec<Option<f64>> {
        (0..self.classes)
            .map(|i| {
                let den = self.row(i) + self.col(i) - self.diag(i);
                (den > 0.0).then(|| self.diag(i) / den)
            })
            .collect()
    }

    /// (1/L) sum_i l_ii / (-l_ii + sum_j (l_ij + l_ji))
    pub fn mean_iou(&self, policy: ZeroDenominator) -> Result<f64> {
        self.checked_total()?;
        Ok(self.class_mean(self.class_iou().into_iter(), policy))
    }

    /// (1/N) sum_i l_ii * sum_j l_ij / (-l_ii + sum_j (l_ij + l_ji))
    pub fn weighted_iou(&self) -> Result<f64> {
        let n = self.checked_total()?;
        let s: f64 = (0..self.classes)
            .map(|i| {
                let den = self.row(i) + self.col(i) - self.diag(i);
                if den > 0.0 {
                    self.diag(i) * self.row(i) / den
                } else {
                    0.0
                }
            })
            .sum();
        Ok(s / n)
    }

    pub fn metrics(&self, policy: ZeroDenominator) -> Result<Metrics> {
        Ok(Metrics {
            pixel_acc: self.pixel_acc()?,
            mean_acc: self.mean_acc(policy)?,
            mean_iou: self.mean_iou(policy)?,
            weighted_iou: self.weighted_iou()?,
            per_class_iou: self.class_iou(),
        })
    }
}
