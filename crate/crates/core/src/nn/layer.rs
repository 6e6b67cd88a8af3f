use crate::error::{Error, Result};
use crate::nn::{Scalar, Tensor};

/// Spatial padding for stride-1 convolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// No padding; output shrinks by `kernel - 1`.
    Valid,
    /// Zero padding so the output keeps the input size. For even kernels the
    /// extra row/column goes after the data.
    Same,
}

/// One layer of a sequential model.
///
/// Convolutions use channels-last `(height, width, channels)` activations.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv2D {
        filters: usize,
        kernel: (usize, usize),
        padding: Padding,
    },
    Dense {
        units: usize,
    },
    ReLU,
    Dropout {
        rate: f64,
    },
    Reshape {
        shape: Vec<usize>,
    },
    Flatten,
    Softmax,
}

/// Trainable parameters of a Conv2D or Dense layer.
///
/// Dense kernels are `(inputs, units)`; Conv2D kernels are
/// `(kernel_h, kernel_w, in_channels, filters)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<S: Scalar = f32> {
    pub kernel: Tensor<S>,
    pub bias: Tensor<S>,
}

impl<S: Scalar> Params<S> {
    pub fn zeros_like(&self) -> Self {
        Params {
            kernel: Tensor::zeros(self.kernel.shape().to_vec()),
            bias: Tensor::zeros(self.bias.shape().to_vec()),
        }
    }

    pub fn len(&self) -> usize {
        self.kernel.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cast<T: Scalar>(&self) -> Params<T> {
        Params {
            kernel: self.kernel.cast(),
            bias: self.bias.cast(),
        }
    }
}

impl Layer {
    /// Short lowercase tag used to name weights (`conv2d_0`, `dense_5`, ...).
    pub fn tag(&self) -> &'static str {
        match self {
            Layer::Conv2D { .. } => "conv2d",
            Layer::Dense { .. } => "dense",
            Layer::ReLU => "relu",
            Layer::Dropout { .. } => "dropout",
            Layer::Reshape { .. } => "reshape",
            Layer::Flatten => "flatten",
            Layer::Softmax => "softmax",
        }
    }

    pub fn has_params(&self) -> bool {
        matches!(self, Layer::Conv2D { .. } | Layer::Dense { .. })
    }

    pub(crate) fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let in_len: usize = input.iter().product();
        match self {
            Layer::Conv2D {
                filters,
                kernel: (kh, kw),
                padding,
            } => {
                let [h, w, _c] = input else {
                    return Err(Error::InvalidArgument(format!(
                        "conv2d expects (height, width, channels) input, got {input:?}"
                    )));
                };
                if *filters == 0 || *kh == 0 || *kw == 0 {
                    return Err(Error::InvalidArgument("conv2d sizes must be positive".into()));
                }
                let (oh, ow) = match padding {
                    Padding::Same => (*h, *w),
                    Padding::Valid => {
                        if kh > h || kw > w {
                            return Err(Error::InvalidArgument(format!(
                                "valid conv kernel {kh}x{kw} larger than input {h}x{w}"
                            )));
                        }
                        (h - kh + 1, w - kw + 1)
                    }
                };
                Ok(vec![oh, ow, *filters])
            }
            Layer::Dense { units } => {
                if input.len() != 1 {
                    return Err(Error::InvalidArgument(format!(
                        "dense expects a flat input, got {input:?}; insert Flatten"
                    )));
                }
                if *units == 0 {
                    return Err(Error::InvalidArgument("dense units must be positive".into()));
                }
                Ok(vec![*units])
            }
            Layer::Dropout { rate } => {
                if !(0.0..1.0).contains(rate) {
                    return Err(Error::InvalidArgument(format!(
                        "dropout rate must lie in [0, 1), got {rate}"
                    )));
                }
                Ok(input.to_vec())
            }
            Layer::ReLU | Layer::Softmax => Ok(input.to_vec()),
            Layer::Flatten => Ok(vec![in_len]),
            Layer::Reshape { shape } => {
                if shape.iter().product::<usize>() != in_len || shape.contains(&0) {
                    return Err(Error::shape("reshape", shape, input));
                }
                Ok(shape.clone())
            }
        }
    }

    /// `(fan_in, fan_out, kernel shape, bias len)` for parametrized layers.
    pub(crate) fn param_layout(&self, input: &[usize]) -> Option<(usize, usize, Vec<usize>, usize)> {
        match self {
            Layer::Conv2D {
                filters,
                kernel: (kh, kw),
                ..
            } => {
                let c = input[2];
                Some((
                    kh * kw * c,
                    kh * kw * filters,
                    vec![*kh, *kw, c, *filters],
                    *filters,
                ))
            }
            Layer::Dense { units } => {
                let n = input[0];
                Some((n, *units, vec![n, *units], *units))
            }
            _ => None,
        }
    }
}

/// Geometry of a stride-1 2-D convolution over channels-last data.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeometry {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub kh: usize,
    pub kw: usize,
    pub oh: usize,
    pub ow: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

impl ConvGeometry {
    pub fn new(input: &[usize], kernel: (usize, usize), padding: Padding) -> Self {
        let (h, w, c) = (input[0], input[1], input[2]);
        let (kh, kw) = kernel;
        let (oh, ow, pad_top, pad_left) = match padding {
            Padding::Same => (h, w, (kh - 1) / 2, (kw - 1) / 2),
            Padding::Valid => (h - kh + 1, w - kw + 1, 0, 0),
        };
        ConvGeometry {
            h,
            w,
            c,
            kh,
            kw,
            oh,
            ow,
            pad_top,
            pad_left,
        }
    }

    pub fn patch_len(&self) -> usize {
        self.kh * self.kw * self.c
    }

    pub fn positions(&self) -> usize {
        self.oh * self.ow
    }

    fn source(&self, o: usize, k: usize, pad: usize, limit: usize) -> Option<usize> {
        (o + k).checked_sub(pad).filter(|&i| i < limit)
    }

    /// Contiguous runs shared by a kernel tap and an output row: yields
    /// `(input offset, output offset, length)` per image row, in positions.
    fn segments(&self, batch: usize, ky: usize, kx: usize) -> Vec<(usize, usize, usize)> {
        let lo = self.pad_left.saturating_sub(kx);
        let hi = self.ow.min((self.w + self.pad_left).saturating_sub(kx));
        if hi <= lo {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(batch * self.oh);
        for b in 0..batch {
            for oy in 0..self.oh {
                let Some(iy) = self.source(oy, ky, self.pad_top, self.h) else {
                    continue;
                };
                let ix = lo + kx - self.pad_left;
                out.push((
                    (b * self.h + iy) * self.w + ix,
                    (b * self.oh + oy) * self.ow + lo,
                    hi - lo,
                ));
            }
        }
        out
    }

    /// `out += conv(x, kernel)` without bias; `kernel` is `(kh, kw, c, filters)`.
    pub fn forward<S: Scalar>(&self, x: &[S], kernel: &[S], filters: usize, batch: usize, out: &mut [S]) {
        let c = self.c;
        for ky in 0..self.kh {
            for kx in 0..self.kw {
                let tap = &kernel[(ky * self.kw + kx) * c * filters..][..c * filters];
                for (src, dst, len) in self.segments(batch, ky, kx) {
                    S::gemm(
                        len,
                        c,
                        filters,
                        &x[src * c..(src + len) * c],
                        false,
                        tap,
                        false,
                        &mut out[dst * filters..(dst + len) * filters],
                        true,
                    );
                }
            }
        }
    }

    /// Accumulates the kernel gradient into `dk` and, when given, the input gradient into `dx`.
    #[allow(clippy::too_many_arguments)]
    pub fn backward<S: Scalar>(
        &self,
        x: &[S],
        kernel: &[S],
        dout: &[S],
        filters: usize,
        batch: usize,
        mut dk: Option<&mut [S]>,
        mut dx: Option<&mut [S]>,
    ) {
        let c = self.c;
        for ky in 0..self.kh {
            for kx in 0..self.kw {
                let off = (ky * self.kw + kx) * c * filters;
                for (src, dst, len) in self.segments(batch, ky, kx) {
                    let g = &dout[dst * filters..(dst + len) * filters];
                    if let Some(dk) = dk.as_deref_mut() {
                        S::gemm(
                            c,
                            len,
                            filters,
                            &x[src * c..(src + len) * c],
                            true,
                            g,
                            false,
                            &mut dk[off..off + c * filters],
                            true,
                        );
                    }
                    if let Some(dx) = dx.as_deref_mut() {
                        S::gemm(
                            len,
                            filters,
                            c,
                            g,
                            false,
                            &kernel[off..off + c * filters],
                            true,
                            &mut dx[src * c..(src + len) * c],
                            true,
                        );
                    }
                }
            }
        }
    }

    /// Unfolds `batch` channels-last images into `(batch * positions, patch_len)` rows.
    #[cfg(test)]
    fn im2col<S: Scalar>(&self, x: &[S], batch: usize) -> Vec<S> {
        let in_len = self.h * self.w * self.c;
        let patch = self.patch_len();
        let mut cols = vec![S::zero(); batch * self.positions() * patch];
        for b in 0..batch {
            let img = &x[b * in_len..(b + 1) * in_len];
            for oy in 0..self.oh {
                for ox in 0..self.ow {
                    let row = (b * self.positions() + oy * self.ow + ox) * patch;
                    for ky in 0..self.kh {
                        let Some(iy) = self.source(oy, ky, self.pad_top, self.h) else {
                            continue;
                        };
                        for kx in 0..self.kw {
                            let Some(ix) = self.source(ox, kx, self.pad_left, self.w) else {
                                continue;
                            };
                            let dst = row + (ky * self.kw + kx) * self.c;
                            let src = (iy * self.w + ix) * self.c;
                            cols[dst..dst + self.c].copy_from_slice(&img[src..src + self.c]);
                        }
                    }
                }
            }
        }
        cols
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_padding_keeps_spatial_size() {
        let l = Layer::Conv2D {
            filters: 80,
            kernel: (2, 3),
            padding: Padding::Same,
        };
        assert_eq!(l.output_shape(&[2, 128, 256]).unwrap(), vec![2, 128, 80]);
    }

    #[test]
    fn valid_padding_shrinks() {
        let l = Layer::Conv2D {
            filters: 4,
            kernel: (2, 3),
            padding: Padding::Valid,
        };
        assert_eq!(l.output_shape(&[2, 10, 1]).unwrap(), vec![1, 8, 4]);
    }

    #[test]
    fn dense_requires_flat_input() {
        assert!(Layer::Dense { units: 3 }.output_shape(&[2, 2, 1]).is_err());
    }

    #[test]
    fn dropout_rate_range() {
        assert!(Layer::Dropout { rate: 1.0 }.output_shape(&[3]).is_err());
        assert!(Layer::Dropout { rate: 0.5 }.output_shape(&[3]).is_ok());
    }

    fn sample(n: usize, f: f64) -> Vec<f64> {
        (0..n).map(|i| (i as f64 * f).sin()).collect()
    }

    #[test]
    fn tap_forward_matches_im2col() {
        for (shape, kernel, pad) in [
            ([2, 5, 3], (2, 3), Padding::Same),
            ([3, 6, 2], (2, 2), Padding::Same),
            ([3, 6, 2], (2, 3), Padding::Valid),
            ([1, 7, 1], (1, 3), Padding::Same),
        ] {
            let g = ConvGeometry::new(&shape, kernel, pad);
            let filters = 4;
            let x = sample(2 * shape.iter().product::<usize>(), 0.7);
            let k = sample(g.patch_len() * filters, 0.3);
            let mut want = vec![0.0; 2 * g.positions() * filters];
            f64::gemm(2 * g.positions(), g.patch_len(), filters, &g.im2col(&x, 2), false, &k, false, &mut want, false);
            let mut got = vec![0.0; want.len()];
            g.forward(&x, &k, filters, 2, &mut got);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12, "{shape:?} {kernel:?}");
            }
        }
    }

    #[test]
    fn tap_backward_is_adjoint_of_forward() {
        // <conv(x, k), y> is bilinear: its partials are <dx, x> and <dk, k>.
        let g = ConvGeometry::new(&[2, 5, 3], (2, 3), Padding::Same);
        let filters = 4;
        let x = sample(2 * 30, 0.7);
        let k = sample(g.patch_len() * filters, 0.3);
        let y = sample(2 * g.positions() * filters, 0.9);
        let mut out = vec![0.0; y.len()];
        g.forward(&x, &k, filters, 2, &mut out);
        let lhs: f64 = out.iter().zip(&y).map(|(a, b)| a * b).sum();
        let mut dx = vec![0.0; x.len()];
        let mut dk = vec![0.0; k.len()];
        g.backward(&x, &k, &y, filters, 2, Some(&mut dk), Some(&mut dx));
        let via_x: f64 = dx.iter().zip(&x).map(|(a, b)| a * b).sum();
        let via_k: f64 = dk.iter().zip(&k).map(|(a, b)| a * b).sum();
        assert!((lhs - via_x).abs() < 1e-10);
        assert!((lhs - via_k).abs() < 1e-10);
    }
}
