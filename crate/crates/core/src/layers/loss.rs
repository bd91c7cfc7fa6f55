//! The multinomial logistic loss over per-pixel class scores.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::labels::LabelMap;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Probabilities are clamped to at least this value before the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// How the scores fed to the loss are interpreted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreForm {
    /// Unnormalized logits; a per-pixel softmax is applied.
    Logits,
    /// Non-negative scores renormalized per pixel to sum to one.
    #[default]
    Probabilities,
    /// Non-negative scores used as likelihoods without renormalization.
    Unnormalized,
}

/// Loss value plus the number of pixels that contributed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiValue<S> {
    pub loss: S,
    pub counted: usize,
}

impl<S> PhiValue<S> {
    /// Every pixel carried the ignore label; the loss is defined as zero.
    pub fn all_ignored(&self) -> bool {
        self.counted == 0
    }
}

pub(crate) fn check_labels<S: Scalar>(pred: &Tensor<S>, labels: &LabelMap) -> Result<()> {
    let [n, c, h, w] = pred.shape().0;
    let ls = labels.shape();
    if ls.batch() != n || ls.height() != h || ls.width() != w {
        return Err(shape_err!("labels {ls} do not match prediction {}", pred.shape()));
    }
    labels.validate(c)
}

/// Per-pixel probability of the true class and the normalizer used to form it.
fn pixel_prob<S: Scalar>(form: ScoreForm, d: &[S], base: usize, plane: usize, c: usize, y: usize) -> (S, S) {
    match form {
        ScoreForm::Logits => {
            let mut m = d[base];
            for ch in 1..c {
                m = m.max(d[base + ch * plane]);
            }
            let mut s = S::zero();
            for ch in 0..c {
                s = s + (d[base + ch * plane] - m).exp();
            }
            ((d[base + y * plane] - m).exp() / s, s)
        }
        ScoreForm::Probabilities => {
            let mut s = S::zero();
            for ch in 0..c {
                s = s + d[base + ch * plane];
            }
            if s > S::zero() {
                (d[base + y * plane] / s, s)
            } else {
                (S::zero(), s)
            }
        }
        ScoreForm::Unnormalized => (d[base + y * plane], S::one()),
    }
}

/// Mean over non-ignored pixels of -log p(y).
pub fn phi_loss<S: Scalar>(pred: &Tensor<S>, labels: &LabelMap, form: ScoreForm) -> Result<PhiValue<S>> {
    check_labels(pred, labels)?;
    let [n, c, h, w] = pred.shape().0;
    let plane = h * w;
    let floor = S::lit(PROB_FLOOR);
    let d = pred.data();
    let mut total = S::zero();
    let mut counted = 0usize;
    for b in 0..n {
        for p in 0..plane {
            let y = labels.labels()[b * plane + p];
            if y == labels.ignore {
                continue;
            }
            let (q, _) = pixel_prob(form, d, b * c * plane + p, plane, c, y as usize);
            total = total - q.max(floor).ln();
            counted += 1;
        }
    }
    if counted == 0 {
        log::warn!("phi_loss: every pixel is ignored, loss defined as 0");
        return Ok(PhiValue {
            loss: S::zero(),
            counted,
        });
    }
    Ok(PhiValue {
        loss: total / S::lit(counted as f64),
        counted,
    })
}

pub(crate) fn phi_backward<S: Scalar>(
    pred: &Tensor<S>,
    labels: &LabelMap,
    form: ScoreForm,
    counted: usize,
    dloss: S,
    dx: &mut [S],
) {
    if counted == 0 {
        return;
    }
    let [n, c, h, w] = pred.shape().0;
    let plane = h * w;
    let floor = S::lit(PROB_FLOOR);
    let scale = dloss / S::lit(counted as f64);
    let d = pred.data();
    for b in 0..n {
        for p in 0..plane {
            let y = labels.labels()[b * plane + p];
            if y == labels.ignore {
                continue;
            }
            let y = y as usize;
            let base = b * c * plane + p;
            let (q, norm) = pixel_prob(form, d, base, plane, c, y);
            if q < floor {
                // clamped: locally constant
                continue;
            }
            match form {
                ScoreForm::Logits => {
                    let m = (0..c).map(|ch| d[base + ch * plane]).fold(S::neg_infinity(), S::max);
                    for ch in 0..c {
                        let pc = (d[base + ch * plane] - m).exp() / norm;
                        let t = if ch == y { S::one() } else { S::zero() };
                        dx[base + ch * plane] = dx[base + ch * plane] + scale * (pc - t);
                    }
                }
                ScoreForm::Probabilities => {
                    let inv = S::one() / norm;
                    for ch in 0..c {
                        let mut g = inv;
                        if ch == y {
                            g = g - S::one() / d[base + y * plane];
                        }
                        dx[base + ch * plane] = dx[base + ch * plane] + scale * g;
                    }
                }
                ScoreForm::Unnormalized => {
                    let i = base + y * plane;
                    dx[i] = dx[i] - scale / d[i];
                }
            }
        }
    }
}
