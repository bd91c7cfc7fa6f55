//! Standard and dilated 2-D convolution via im2col and a blocked matrix product.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// Hyperparameters of a square-kernel convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl ConvSpec {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel,
            stride: 1,
            padding: 0,
            dilation: 1,
        }
    }

    /// 3x3, stride 1, padding equal to the dilation so the spatial size is kept.
    pub fn same3x3(in_channels: usize, out_channels: usize, dilation: usize) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel: 3,
            stride: 1,
            padding: dilation,
            dilation,
        }
    }

    pub fn with_stride(mut self, s: usize) -> Self {
        self.stride = s;
        self
    }
    pub fn with_padding(mut self, p: usize) -> Self {
        self.padding = p;
        self
    }
    pub fn with_dilation(mut self, d: usize) -> Self {
        self.dilation = d;
        self
    }

    /// k + (k - 1)(d - 1)
    pub fn effective_extent(&self) -> usize {
        self.kernel + (self.kernel - 1) * (self.dilation - 1)
    }

    pub fn weight_shape(&self) -> Shape {
        Shape::new(self.out_channels, self.in_channels, self.kernel, self.kernel)
    }

    pub fn bias_shape(&self) -> Shape {
        Shape::new(1, self.out_channels, 1, 1)
    }

    /// Number of kernel weights, excluding biases.
    pub fn weight_count(&self) -> usize {
        self.weight_shape().numel()
    }

    fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(shape_err!("conv channels must be positive: {self:?}"));
        }
        if self.kernel == 0 || self.stride == 0 || self.dilation == 0 {
            return Err(shape_err!("kernel, stride and dilation must be positive: {self:?}"));
        }
        Ok(())
    }

    /// Output extent along one axis, or a shape error when it would be < 1.
    pub fn output_len(&self, input: usize) -> Result<usize> {
        self.validate()?;
        let padded = input + 2 * self.padding;
        let ext = self.effective_extent();
        if padded < ext {
            return Err(shape_err!(
                "conv output size < 1: input {input} + 2*{} padding < extent {ext}",
                self.padding
            ));
        }
        Ok((padded - ext) / self.stride + 1)
    }

    pub fn output_shape(&self, x: Shape) -> Result<Shape> {
        if x.channels() != self.in_channels {
            return Err(shape_err!(
                "conv expects {} input channels, got {x}",
                self.in_channels
            ));
        }
        Ok(Shape::new(
            x.batch(),
            self.out_channels,
            self.output_len(x.height())?,
            self.output_len(x.width())?,
        ))
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1 && self.padding == 0
    }
}

pub(crate) fn check_operands<S: Scalar>(
    spec: &ConvSpec,
    x: &Tensor<S>,
    w: &Tensor<S>,
    b: Option<&Tensor<S>>,
) -> Result<Shape> {
    let out = spec.output_shape(x.shape())?;
    if w.shape() != spec.weight_shape() {
        return Err(shape_err!(
            "conv weight shape {} does not match {}",
            w.shape(),
            spec.weight_shape()
        ));
    }
    if let Some(b) = b {
        if b.shape() != spec.bias_shape() {
            return Err(shape_err!(
                "conv bias shape {} does not match {}",
                b.shape(),
                spec.bias_shape()
            ));
        }
    }
    Ok(out)
}

/// Unfolds one batch item (C, H, W) into a (C*k*k) x (Ho*Wo) column matrix.
fn im2col<S: Scalar>(spec: &ConvSpec, x: &[S], h: usize, w: usize, ho: usize, wo: usize, col: &mut [S]) {
    let k = spec.kernel;
    let (s, p, d) = (spec.stride as isize, spec.padding as isize, spec.dilation as isize);
    let plane_out = ho * wo;
    for c in 0..spec.in_channels {
        let xc = &x[c * h * w..(c + 1) * h * w];
        for u in 0..k {
            for v in 0..k {
                let row = (c * k + u) * k + v;
                let dst = &mut col[row * plane_out..(row + 1) * plane_out];
                for i in 0..ho {
                    let hi = i as isize * s + u as isize * d - p;
                    let out_row = &mut dst[i * wo..(i + 1) * wo];
                    if hi < 0 || hi >= h as isize {
                        out_row.iter_mut().for_each(|o| *o = S::zero());
                        continue;
                    }
                    let src = &xc[hi as usize * w..(hi as usize + 1) * w];
                    for (j, o) in out_row.iter_mut().enumerate() {
                        let wi = j as isize * s + v as isize * d - p;
                        *o = if wi < 0 || wi >= w as isize {
                            S::zero()
                        } else {
                            src[wi as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Folds a column-gradient matrix back onto the input gradient (accumulating).
fn col2im<S: Scalar>(spec: &ConvSpec, col: &[S], h: usize, w: usize, ho: usize, wo: usize, dx: &mut [S]) {
    let k = spec.kernel;
    let (s, p, d) = (spec.stride as isize, spec.padding as isize, spec.dilation as isize);
    let plane_out = ho * wo;
    for c in 0..spec.in_channels {
        let dxc = &mut dx[c * h * w..(c + 1) * h * w];
        for u in 0..k {
            for v in 0..k {
                let row = (c * k + u) * k + v;
                let src = &col[row * plane_out..(row + 1) * plane_out];
                for i in 0..ho {
                    let hi = i as isize * s + u as isize * d - p;
                    if hi < 0 || hi >= h as isize {
                        continue;
                    }
                    let dst = &mut dxc[hi as usize * w..(hi as usize + 1) * w];
                    for j in 0..wo {
                        let wi = j as isize * s + v as isize * d - p;
                        if wi >= 0 && wi < w as isize {
                            dst[wi as usize] = dst[wi as usize] + src[i * wo + j];
                        }
                    }
                }
            }
        }
    }
}

/// y(n,o,i,j) = b(o) + sum_{c,u,v} w(o,c,u,v) x(n, c, i*s + u*d - p, j*s + v*d - p),
/// out-of-bounds reads are zero.
pub fn conv2d_forward<S: Scalar>(
    spec: &ConvSpec,
    x: &Tensor<S>,
    w: &Tensor<S>,
    b: Option<&Tensor<S>>,
) -> Result<Tensor<S>> {
    let out_shape = check_operands(spec, x, w, b)?;
    let [nb, cin, h, wd] = x.shape().0;
    let [_, cout, ho, wo] = out_shape.0;
    let ckk = cin * spec.kernel * spec.kernel;
    let plane_out = ho * wo;
    let mut y = vec![S::zero(); out_shape.numel()];
    let mut col = if spec.is_pointwise() {
        Vec::new()
    } else {
        vec![S::zero(); ckk * plane_out]
    };
    for n in 0..nb {
        let xn = &x.data()[n * cin * h * wd..(n + 1) * cin * h * wd];
        let cols: &[S] = if spec.is_pointwise() {
            xn
        } else {
            im2col(spec, xn, h, wd, ho, wo, &mut col);
            &col
        };
        let yn = &mut y[n * cout * plane_out..(n + 1) * cout * plane_out];
        S::gemm(
            cout,
            ckk,
            plane_out,
            w.data(),
            ckk as isize,
            1,
            cols,
            plane_out as isize,
            1,
            S::zero(),
            yn,
            plane_out as isize,
            1,
        );
        if let Some(b) = b {
            for (o, bias) in b.data().iter().enumerate() {
                yn[o * plane_out..(o + 1) * plane_out]
                    .iter_mut()
                    .for_each(|v| *v = *v + *bias);
            }
        }
    }
    Tensor::from_vec(out_shape, y)
}

/// Gradients of [`conv2d_forward`]; each requested buffer is accumulated into.
pub(crate) fn conv2d_backward<S: Scalar>(
    spec: &ConvSpec,
    x: &Tensor<S>,
    w: &Tensor<S>,
    dy: &[S],
    dx: Option<&mut [S]>,
    dw: Option<&mut [S]>,
    db: Option<&mut [S]>,
) {
    let [nb, cin, h, wd] = x.shape().0;
    let ho = spec.output_len(h).expect("validated in forward");
    let wo = spec.output_len(wd).expect("validated in forward");
    let cout = spec.out_channels;
    let ckk = cin * spec.kernel * spec.kernel;
    let plane_out = ho * wo;
    let pointwise = spec.is_pointwise();

    if let Some(db) = db {
        for n in 0..nb {
            for (o, g) in db.iter_mut().enumerate() {
                let start = (n * cout + o) * plane_out;
                *g = *g + dy[start..start + plane_out].iter().copied().sum::<S>();
            }
        }
    }

    let mut col = if pointwise {
        Vec::new()
    } else {
        vec![S::zero(); ckk * plane_out]
    };
    if let Some(dw) = dw {
        for n in 0..nb {
            let xn = &x.data()[n * cin * h * wd..(n + 1) * cin * h * wd];
            let cols: &[S] = if pointwise {
                xn
            } else {
                im2col(spec, xn, h, wd, ho, wo, &mut col);
                &col
            };
            let dyn_ = &dy[n * cout * plane_out..(n + 1) * cout * plane_out];
            // dW (cout x ckk) += dY_n (cout x P) * col^T (P x ckk)
            S::gemm(
                cout,
                plane_out,
                ckk,
                dyn_,
                plane_out as isize,
                1,
                cols,
                1,
                plane_out as isize,
                S::one(),
                dw,
                ckk as isize,
                1,
            );
        }
    }

    if let Some(dx) = dx {
        for n in 0..nb {
            let dyn_ = &dy[n * cout * plane_out..(n + 1) * cout * plane_out];
            let dxn = &mut dx[n * cin * h * wd..(n + 1) * cin * h * wd];
            if pointwise {
                // dX_n (cin x P) += W^T (cin x cout) * dY_n
                S::gemm(
                    cin,
                    cout,
                    plane_out,
                    w.data(),
                    1,
                    ckk as isize,
                    dyn_,
                    plane_out as isize,
                    1,
                    S::one(),
                    dxn,
                    plane_out as isize,
                    1,
                );
            } else {
                S::gemm(
                    ckk,
                    cout,
                    plane_out,
                    w.data(),
                    1,
                    ckk as isize,
                    dyn_,
                    plane_out as isize,
                    1,
                    S::zero(),
                    &mut col,
                    plane_out as isize,
                    1,
                );
                col2im(spec, &col, h, wd, ho, wo, dxn);
            }
        }
    }
}
