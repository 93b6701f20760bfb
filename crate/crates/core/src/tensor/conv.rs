//! im2col lowering of 2-D cross-correlation and its adjoint.
//!
//! Reductions run in the tensor's own precision. An f32 model can be
//! evaluated with f64 accumulation by casting it (`Tensor::cast`) and running
//! the same code path in f64.

use super::{Result, Tensor, TensorError};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub ho: usize,
    pub wo: usize,
}

impl ConvGeom {
    fn rows(&self) -> usize {
        self.c * self.k * self.k
    }

    fn cols(&self) -> usize {
        self.ho * self.wo
    }
}

/// Spatial output extent of a cross-correlation.
pub fn conv2d_output_size(h: usize, w: usize, k: usize, stride: usize, pad: usize) -> Option<(usize, usize)> {
    if stride == 0 || h + 2 * pad < k || w + 2 * pad < k {
        return None;
    }
    Some(((h + 2 * pad - k) / stride + 1, (w + 2 * pad - k) / stride + 1))
}

/// Output extent of the transposed convolution when none is requested:
/// `stride * h` for "same" padding, otherwise `(h - 1) * stride - 2 pad + k`.
pub fn conv_transpose2d_default_size(h: usize, w: usize, k: usize, stride: usize, pad: usize) -> (usize, usize) {
    if k % 2 == 1 && pad == k / 2 {
        (h * stride, w * stride)
    } else {
        ((h - 1) * stride + k - 2 * pad, (w - 1) * stride + k - 2 * pad)
    }
}

fn im2col<S: Scalar>(x: &[S], g: &ConvGeom) -> Vec<S> {
    let n = g.cols();
    let mut cols = vec![S::zero(); g.rows() * n];
    for ci in 0..g.c {
        let plane = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (ci * g.k + ky) * g.k + kx;
                let dst = &mut cols[row * n..(row + 1) * n];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    let out = &mut dst[oy * g.wo..(oy + 1) * g.wo];
                    for (ox, o) in out.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            *o = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im<S: Scalar>(cols: &[S], g: &ConvGeom, x: &mut [S]) {
    let n = g.cols();
    for ci in 0..g.c {
        let plane = &mut x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (ci * g.k + ky) * g.k + kx;
                let src = &cols[row * n..(row + 1) * n];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..g.wo {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] += src[oy * g.wo + ox];
                        }
                    }
                }
            }
        }
    }
}

fn kernel_dims<S: Scalar>(op: &'static str, kernel: &Tensor<S>) -> Result<(usize, usize, usize)> {
    match kernel.shape()[..] {
        [a, b, k, k2] => {
            if k != k2 {
                return Err(TensorError::ShapeMismatch {
                    op,
                    dim: "kernel width".into(),
                    expected: k,
                    got: k2,
                });
            }
            Ok((a, b, k))
        }
        _ => Err(TensorError::Rank {
            op,
            expected: 4,
            shape: kernel.shape().to_vec(),
        }),
    }
}

fn check_bias<S: Scalar>(op: &'static str, bias: Option<&Tensor<S>>, channels: usize) -> Result<()> {
    if let Some(b) = bias {
        if b.len() != channels || b.rank() != 1 {
            return Err(TensorError::ShapeMismatch {
                op,
                dim: "bias channels".into(),
                expected: channels,
                got: b.len(),
            });
        }
    }
    Ok(())
}

pub(crate) fn conv2d_geom<S: Scalar>(
    input: &Tensor<S>,
    kernel: &Tensor<S>,
    stride: usize,
    pad: usize,
) -> Result<(ConvGeom, usize)> {
    let op = "conv2d";
    let (c, h, w) = input.chw().map_err(|_| TensorError::Rank {
        op,
        expected: 3,
        shape: input.shape().to_vec(),
    })?;
    let (c_out, c_in, k) = kernel_dims(op, kernel)?;
    if c_in != c {
        return Err(TensorError::ShapeMismatch {
            op,
            dim: "input channels".into(),
            expected: c_in,
            got: c,
        });
    }
    let (ho, wo) = conv2d_output_size(h, w, k, stride, pad).ok_or_else(|| TensorError::Invalid {
        op,
        msg: format!("kernel {k} / stride {stride} do not fit a {h}x{w} input"),
    })?;
    Ok((
        ConvGeom {
            c,
            h,
            w,
            k,
            stride,
            pad,
            ho,
            wo,
        },
        c_out,
    ))
}

pub(crate) fn conv2d_forward<S: Scalar>(
    input: &Tensor<S>,
    kernel: &Tensor<S>,
    bias: Option<&Tensor<S>>,
    stride: usize,
    pad: usize,
) -> Result<(Tensor<S>, ConvGeom)> {
    let (g, c_out) = conv2d_geom(input, kernel, stride, pad)?;
    check_bias("conv2d", bias, c_out)?;
    let n = g.cols();
    let r = g.rows();
    let mut out = vec![S::zero(); c_out * n];
    if g.k == 1 && g.stride == 1 && g.pad == 0 {
        S::gemm(c_out, r, n, S::one(), kernel.data(), r as isize, 1, input.data(), n as isize, 1, S::zero(), &mut out, n as isize, 1);
    } else {
        let cols = im2col(input.data(), &g);
        S::gemm(c_out, r, n, S::one(), kernel.data(), r as isize, 1, &cols, n as isize, 1, S::zero(), &mut out, n as isize, 1);
    }
    if let Some(b) = bias {
        for (co, chunk) in out.chunks_mut(n).enumerate() {
            let bv = b.data()[co];
            chunk.iter_mut().for_each(|v| *v += bv);
        }
    }
    Ok((Tensor::from_vec(&[c_out, g.ho, g.wo], out)?, g))
}

/// `(d input, d kernel)` of a cross-correlation given the output gradient.
pub(crate) fn conv2d_backward<S: Scalar>(
    input: &Tensor<S>,
    kernel: &Tensor<S>,
    grad_out: &Tensor<S>,
    g: &ConvGeom,
    need_input: bool,
    need_kernel: bool,
) -> (Option<Tensor<S>>, Option<Tensor<S>>) {
    let c_out = kernel.shape()[0];
    let n = g.cols();
    let r = g.rows();
    let d_input = need_input.then(|| {
        let mut dcols = vec![S::zero(); r * n];
        // kernel^T (r x c_out) * grad (c_out x n)
        S::gemm(r, c_out, n, S::one(), kernel.data(), 1, r as isize, grad_out.data(), n as isize, 1, S::zero(), &mut dcols, n as isize, 1);
        let mut dx = vec![S::zero(); g.c * g.h * g.w];
        col2im(&dcols, g, &mut dx);
        Tensor::from_vec(input.shape(), dx).expect("input shape")
    });
    let d_kernel = need_kernel.then(|| {
        let cols = im2col(input.data(), g);
        let mut dk = vec![S::zero(); c_out * r];
        // grad (c_out x n) * cols^T (n x r)
        S::gemm(c_out, n, r, S::one(), grad_out.data(), n as isize, 1, &cols, 1, n as isize, S::zero(), &mut dk, r as isize, 1);
        Tensor::from_vec(kernel.shape(), dk).expect("kernel shape")
    });
    (d_input, d_kernel)
}

/// Geometry of the cross-correlation whose adjoint maps `input` to an
/// `out_h x out_w` map. `kernel` is `[C_in_of_transpose, C_out_of_transpose, k, k]`.
pub(crate) fn conv_transpose2d_geom<S: Scalar>(
    input: &Tensor<S>,
    kernel: &Tensor<S>,
    stride: usize,
    pad: usize,
    out_size: Option<(usize, usize)>,
) -> Result<(ConvGeom, usize)> {
    let op = "conv_transpose2d";
    let (c, h, w) = input.chw().map_err(|_| TensorError::Rank {
        op,
        expected: 3,
        shape: input.shape().to_vec(),
    })?;
    let (c_from, c_to, k) = kernel_dims(op, kernel)?;
    if c_from != c {
        return Err(TensorError::ShapeMismatch {
            op,
            dim: "input channels".into(),
            expected: c_from,
            got: c,
        });
    }
    let (oh, ow) = out_size.unwrap_or_else(|| conv_transpose2d_default_size(h, w, k, stride, pad));
    match conv2d_output_size(oh, ow, k, stride, pad) {
        Some((hh, ww)) if hh == h && ww == w => {}
        Some((hh, _)) if hh != h => {
            return Err(TensorError::ShapeMismatch {
                op,
                dim: "output height".into(),
                expected: h,
                got: hh,
            })
        }
        Some((_, ww)) => {
            return Err(TensorError::ShapeMismatch {
                op,
                dim: "output width".into(),
                expected: w,
                got: ww,
            })
        }
        None => {
            return Err(TensorError::Invalid {
                op,
                msg: format!("output {oh}x{ow} incompatible with kernel {k}"),
            })
        }
    }
    Ok((
        ConvGeom {
            c: c_to,
            h: oh,
            w: ow,
            k,
            stride,
            pad,
            ho: h,
            wo: w,
        },
        c_to,
    ))
}

pub(crate) fn conv_transpose2d_forward<S: Scalar>(
    input: &Tensor<S>,
    kernel: &Tensor<S>,
    bias: Option<&Tensor<S>>,
    stride: usize,
    pad: usize,
    out_size: Option<(usize, usize)>,
) -> Result<(Tensor<S>, ConvGeom)> {
    let (g, c_to) = conv_transpose2d_geom(input, kernel, stride, pad, out_size)?;
    check_bias("conv_transpose2d", bias, c_to)?;
    let c_from = input.shape()[0];
    let n = g.cols();
    let r = g.rows();
    let mut cols = vec![S::zero(); r * n];
    S::gemm(r, c_from, n, S::one(), kernel.data(), 1, r as isize, input.data(), n as isize, 1, S::zero(), &mut cols, n as isize, 1);
    let plane = g.h * g.w;
    let mut out = vec![S::zero(); c_to * plane];
    col2im(&cols, &g, &mut out);
    if let Some(b) = bias {
        for (co, chunk) in out.chunks_mut(plane).enumerate() {
            let bv = b.data()[co];
            chunk.iter_mut().for_each(|v| *v += bv);
        }
    }
    Ok((Tensor::from_vec(&[c_to, g.h, g.w], out)?, g))
}

pub(crate) fn conv_transpose2d_backward<S: Scalar>(
    input: &Tensor<S>,
    kernel: &Tensor<S>,
    grad_out: &Tensor<S>,
    g: &ConvGeom,
    need_input: bool,
    need_kernel: bool,
) -> (Option<Tensor<S>>, Option<Tensor<S>>) {
    let c_from = kernel.shape()[0];
    let n = g.cols();
    let r = g.rows();
    if !need_input && !need_kernel {
        return (None, None);
    }
    let gcols = im2col(grad_out.data(), g);
    let d_input = need_input.then(|| {
        let mut dy = vec![S::zero(); c_from * n];
        S::gemm(c_from, r, n, S::one(), kernel.data(), r as isize, 1, &gcols, n as isize, 1, S::zero(), &mut dy, n as isize, 1);
        Tensor::from_vec(input.shape(), dy).expect("input shape")
    });
    let d_kernel = need_kernel.then(|| {
        let mut dk = vec![S::zero(); c_from * r];
        S::gemm(c_from, n, r, S::one(), input.data(), n as isize, 1, &gcols, 1, n as isize, S::zero(), &mut dk, r as isize, 1);
        Tensor::from_vec(kernel.shape(), dk).expect("kernel shape")
    });
    (d_input, d_kernel)
}

pub(crate) fn channel_sums<S: Scalar>(t: &Tensor<S>) -> Tensor<S> {
    let c = t.shape()[0];
    let plane = t.len() / c;
    let sums = t.data().chunks(plane).map(|ch| ch.iter().copied().sum()).collect();
    Tensor::from_vec(&[c], sums).expect("bias shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(x: &Tensor<f64>, k: &Tensor<f64>, stride: usize, pad: usize) -> Tensor<f64> {
        let (c, h, w) = x.chw().unwrap();
        let (co, _, ks, _) = (k.shape()[0], k.shape()[1], k.shape()[2], k.shape()[3]);
        let (ho, wo) = conv2d_output_size(h, w, ks, stride, pad).unwrap();
        let mut out = vec![0.0; co * ho * wo];
        for o in 0..co {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = 0.0;
                    for ci in 0..c {
                        for ky in 0..ks {
                            for kx in 0..ks {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                    acc += x.data()[(ci * h + iy as usize) * w + ix as usize]
                                        * k.data()[((o * c + ci) * ks + ky) * ks + kx];
                                }
                            }
                        }
                    }
                    out[(o * ho + oy) * wo + ox] = acc;
                }
            }
        }
        Tensor::from_vec(&[co, ho, wo], out).unwrap()
    }

    #[test]
    fn im2col_conv_matches_direct_loops() {
        let x = Tensor::from_vec(&[2, 5, 6], (0..60).map(|i| ((i * 7) % 11) as f64 - 5.0).collect()).unwrap();
        let k = Tensor::from_vec(&[3, 2, 3, 3], (0..54).map(|i| ((i * 5) % 7) as f64 * 0.25 - 0.7).collect()).unwrap();
        for (stride, pad) in [(1, 1), (2, 1), (1, 0), (2, 0)] {
            let (fast, _) = conv2d_forward(&x, &k, None, stride, pad).unwrap();
            let slow = naive_conv(&x, &k, stride, pad);
            assert_eq!(fast.shape(), slow.shape());
            for (a, b) in fast.data().iter().zip(slow.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_channel_mismatch_by_name() {
        let x = Tensor::<f32>::zeros(&[2, 4, 4]);
        let k = Tensor::<f32>::zeros(&[1, 3, 3, 3]);
        let err = conv2d_forward(&x, &k, None, 1, 1).unwrap_err();
        assert!(err.to_string().contains("input channels"), "{err}");
    }

    #[test]
    fn non_square_kernel_is_rejected() {
        let x = Tensor::<f32>::zeros(&[1, 4, 4]);
        let k = Tensor::<f32>::zeros(&[1, 1, 3, 1]);
        assert!(conv2d_forward(&x, &k, None, 1, 0).is_err());
    }

    #[test]
    fn transpose_output_size_is_checked() {
        let y = Tensor::<f32>::zeros(&[1, 3, 3]);
        let k = Tensor::<f32>::zeros(&[1, 1, 3, 3]);
        let err = conv_transpose2d_forward(&y, &k, None, 2, 1, Some((9, 6))).unwrap_err();
        assert!(err.to_string().contains("output height"), "{err}");
        assert!(conv_transpose2d_forward(&y, &k, None, 2, 1, Some((6, 6))).is_ok());
    }
}
