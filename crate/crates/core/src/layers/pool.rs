use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// 2x2 max pooling with stride 2. Ties go to the first element in scan order.
/// Returns the pooled tensor and, per output element, the flat input index it came from.
pub fn max_pool2<S: Scalar>(x: &Tensor<S>) -> Result<(Tensor<S>, Vec<u32>)> {
    let [n, c, h, w] = x.shape().0;
    if h % 2 != 0 || w % 2 != 0 || h == 0 || w == 0 {
        return Err(shape_err!("max_pool2 needs even non-zero spatial dims, got {}", x.shape()));
    }
    let (ho, wo) = (h / 2, w / 2);
    let out = Shape::new(n, c, ho, wo);
    let mut y = Vec::with_capacity(out.numel());
    let mut arg = Vec::with_capacity(out.numel());
    let d = x.data();
    for plane in 0..n * c {
        let base = plane * h * w;
        for i in 0..ho {
            for j in 0..wo {
                let mut best = base + 2 * i * w + 2 * j;
                for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * i + di) * w + 2 * j + dj;
                    if d[idx] > d[best] {
                        best = idx;
                    }
                }
                y.push(d[best]);
                arg.push(best as u32);
            }
        }
    }
    Ok((Tensor::from_vec(out, y)?, arg))
}

pub(crate) fn max_pool2_backward<S: Scalar>(argmax: &[u32], dy: &[S], dx: &mut [S]) {
    for (g, &src) in dy.iter().zip(argmax) {
        dx[src as usize] = dx[src as usize] + *g;
    }
}
