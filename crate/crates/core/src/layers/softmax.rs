use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Per-pixel softmax across the channel axis, with max subtraction.
pub fn softmax_channels<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let [n, c, h, w] = x.shape().0;
    let plane = h * w;
    let mut y = x.data().to_vec();
    let mut maxv = vec![S::zero(); plane];
    let mut sum = vec![S::zero(); plane];
    for b in 0..n {
        let block = &mut y[b * c * plane..(b + 1) * c * plane];
        maxv.copy_from_slice(&block[..plane]);
        for ch in 1..c {
            for (m, v) in maxv.iter_mut().zip(&block[ch * plane..(ch + 1) * plane]) {
                *m = m.max(*v);
            }
        }
        sum.iter_mut().for_each(|s| *s = S::zero());
        for ch in 0..c {
            for ((v, m), s) in block[ch * plane..(ch + 1) * plane]
                .iter_mut()
                .zip(&maxv)
                .zip(sum.iter_mut())
            {
                *v = (*v - *m).exp();
                *s = *s + *v;
            }
        }
        for ch in 0..c {
            for (v, s) in block[ch * plane..(ch + 1) * plane].iter_mut().zip(&sum) {
                *v = *v / *s;
            }
        }
    }
    Tensor::from_vec(x.shape(), y).expect("same shape")
}

/// dx = p * (g - sum_c g p), accumulated.
pub(crate) fn softmax_channels_backward<S: Scalar>(p: &Tensor<S>, dy: &[S], dx: &mut [S]) {
    let [n, c, h, w] = p.shape().0;
    let plane = h * w;
    let pd = p.data();
    let mut dot = vec![S::zero(); plane];
    for b in 0..n {
        let off = b * c * plane;
        dot.iter_mut().for_each(|d| *d = S::zero());
        for ch in 0..c {
            let o = off + ch * plane;
            for (k, d) in dot.iter_mut().enumerate() {
                *d = *d + dy[o + k] * pd[o + k];
            }
        }
        for ch in 0..c {
            let o = off + ch * plane;
            for (k, d) in dot.iter().enumerate() {
                dx[o + k] = dx[o + k] + pd[o + k] * (dy[o + k] - *d);
            }
        }
    }
}
