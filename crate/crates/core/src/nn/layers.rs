//! Forward and backward kernels for the layer types of the transcoder.
//!
//! All spatial layers use valid (no) padding. Inputs may carry a leading
//! batch axis (`[N, C, H, W]`) or not (`[C, H, W]`); outputs keep the rank
//! of the input.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::gemm::{gemm_nn, gemm_nt, gemm_tn};
use super::Tensor;
use crate::{Error, Result, Scalar};

/// Geometry of one conv/deconv pairing: the conv maps `[c_in, h, w]` to
/// `[c_out, out_h, out_w]`, the deconv maps back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    fn col_rows(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    fn col_cols(&self) -> usize {
        self.out_h * self.out_w
    }
}

/// Output side length of a valid convolution, `None` if the kernel does not fit.
pub fn conv_out_len(len: usize, kernel: usize, stride: usize) -> Option<usize> {
    if stride == 0 || kernel == 0 || kernel > len {
        None
    } else {
        Some((len - kernel) / stride + 1)
    }
}

/// Output side length of a transposed convolution.
pub fn deconv_out_len(len: usize, kernel: usize, stride: usize) -> usize {
    (len - 1) * stride + kernel
}

fn split_batch(op: &'static str, dims: &[usize]) -> Result<(usize, usize, usize, usize, bool)> {
    match *dims {
        [c, h, w] => Ok((1, c, h, w, false)),
        [n, c, h, w] => Ok((n, c, h, w, true)),
        _ => Err(Error::shape(op, format!("input must be [C,H,W] or [N,C,H,W], got {dims:?}"))),
    }
}

/// Writes the patches of one sample into columns `off..off + out_h·out_w`
/// of a column matrix whose rows are `ld` long.
fn im2col<S: Scalar>(x: &[S], g: &ConvGeometry, cols: &mut [S], ld: usize, off: usize) {
    for c in 0..g.c_in {
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = (c * g.kh + ky) * g.kw + kx;
                let dst = &mut cols[row * ld + off..];
                for oy in 0..g.out_h {
                    let src = &x[(c * g.h + oy * g.stride + ky) * g.w + kx..];
                    let d = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    if g.stride == 1 {
                        d.copy_from_slice(&src[..g.out_w]);
                    } else {
                        for (ox, dv) in d.iter_mut().enumerate() {
                            *dv = src[ox * g.stride];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters one sample's columns back, accumulating.
fn col2im<S: Scalar>(cols: &[S], g: &ConvGeometry, x: &mut [S], ld: usize, off: usize) {
    for c in 0..g.c_in {
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = (c * g.kh + ky) * g.kw + kx;
                let src = &cols[row * ld + off..];
                for oy in 0..g.out_h {
                    let base = (c * g.h + oy * g.stride + ky) * g.w + kx;
                    let s = &src[oy * g.out_w..(oy + 1) * g.out_w];
                    for (ox, &sv) in s.iter().enumerate() {
                        x[base + ox * g.stride] += sv;
                    }
                }
            }
        }
    }
}

/// Column matrix `[rows, n·p]` of a whole batch.
fn batch_im2col<S: Scalar>(x: &[S], n: usize, g: &ConvGeometry) -> Vec<S> {
    let (rows, p) = (g.col_rows(), g.col_cols());
    let in_len = g.c_in * g.h * g.w;
    let mut cols = vec![S::ZERO; rows * n * p];
    for s in 0..n {
        im2col(&x[s * in_len..(s + 1) * in_len], g, &mut cols, n * p, s * p);
    }
    cols
}

fn batch_col2im<S: Scalar>(cols: &[S], n: usize, g: &ConvGeometry) -> Vec<S> {
    let p = g.col_cols();
    let in_len = g.c_in * g.h * g.w;
    let mut x = vec![S::ZERO; n * in_len];
    for s in 0..n {
        col2im(cols, g, &mut x[s * in_len..(s + 1) * in_len], n * p, s * p);
    }
    x
}

/// `[n, c, p]` to `[c, n·p]`.
fn channel_major<S: Scalar>(x: &[S], n: usize, c: usize, p: usize) -> Vec<S> {
    let mut out = vec![S::ZERO; x.len()];
    for s in 0..n {
        for k in 0..c {
            out[k * n * p + s * p..k * n * p + (s + 1) * p].copy_from_slice(&x[(s * c + k) * p..(s * c + k + 1) * p]);
        }
    }
    out
}

/// `[c, n·p]` to `[n, c, p]`.
fn sample_major<S: Scalar>(x: &[S], n: usize, c: usize, p: usize) -> Vec<S> {
    let mut out = vec![S::ZERO; x.len()];
    for s in 0..n {
        for k in 0..c {
            out[(s * c + k) * p..(s * c + k + 1) * p].copy_from_slice(&x[k * n * p + s * p..k * n * p + (s + 1) * p]);
        }
    }
    out
}

fn add_channel_bias<S: Scalar>(out: &mut [S], bias: Option<&Tensor<S>>, plane: usize) {
    if let Some(b) = bias {
        let c = b.len();
        for (i, chunk) in out.chunks_mut(plane).enumerate() {
            let bv = b.data()[i % c];
            for v in chunk {
                *v += bv;
            }
        }
    }
}

fn channel_sums<S: Scalar>(go: &[S], c: usize, plane: usize) -> Vec<S> {
    let mut d_b = vec![S::ZERO; c];
    for (i, chunk) in go.chunks(plane).enumerate() {
        d_b[i % c] += chunk.iter().fold(S::ZERO, |a, &v| a + v);
    }
    d_b
}

fn conv_geometry(
    op: &'static str,
    c: usize,
    h: usize,
    w: usize,
    kernels: &[usize],
    stride: usize,
) -> Result<ConvGeometry> {
    let [k, kc, kh, kw] = *kernels else {
        return Err(Error::shape(op, format!("kernel must be [K,C,kh,kw], got {kernels:?}")));
    };
    if kc != c {
        return Err(Error::shape(
            op,
            format!("channel axis: input has {c} channels, kernel expects {kc}"),
        ));
    }
    let out_h = conv_out_len(h, kh, stride).ok_or_else(|| {
        Error::shape(op, format!("height axis: kernel {kh} stride {stride} does not fit height {h}"))
    })?;
    let out_w = conv_out_len(w, kw, stride).ok_or_else(|| {
        Error::shape(op, format!("width axis: kernel {kw} stride {stride} does not fit width {w}"))
    })?;
    Ok(ConvGeometry {
        c_in: c,
        h,
        w,
        c_out: k,
        kh,
        kw,
        stride,
        out_h,
        out_w,
    })
}

fn check_bias<S: Scalar>(op: &'static str, bias: Option<&Tensor<S>>, n: usize) -> Result<()> {
    if let Some(b) = bias {
        if b.dims() != [n] {
            return Err(Error::shape(op, format!("bias must be [{n}], got {:?}", b.dims())));
        }
    }
    Ok(())
}

/// Valid cross-correlation: `[N?,C,H,W] * [K,C,kh,kw] -> [N?,K,H',W']`.
pub fn conv2d<S: Scalar>(
    input: &Tensor<S>,
    kernels: &Tensor<S>,
    bias: Option<&Tensor<S>>,
    stride: usize,
) -> Result<Tensor<S>> {
    let (n, c, h, w, batched) = split_batch("conv2d", input.dims())?;
    let g = conv_geometry("conv2d", c, h, w, kernels.dims(), stride)?;
    check_bias("conv2d", bias, g.c_out)?;
    let (rows, p) = (g.col_rows(), g.col_cols());
    let cols = batch_im2col(input.data(), n, &g);
    let mut out_t = vec![S::ZERO; g.c_out * n * p];
    gemm_nn(g.c_out, n * p, rows, kernels.data(), &cols, &mut out_t);
    let mut out = sample_major(&out_t, n, g.c_out, p);
    add_channel_bias(&mut out, bias, p);
    let dims = if batched {
        vec![n, g.c_out, g.out_h, g.out_w]
    } else {
        vec![g.c_out, g.out_h, g.out_w]
    };
    Tensor::new(&dims, out)
}

/// Gradients of [`conv2d`] given the upstream gradient `grad_out`.
/// Returns `(d_input, d_kernels, d_bias)`.
pub fn conv2d_backward<S: Scalar>(
    input: &Tensor<S>,
    kernels: &Tensor<S>,
    grad_out: &Tensor<S>,
    stride: usize,
) -> (Tensor<S>, Tensor<S>, Tensor<S>) {
    let (n, c, h, w, _) = split_batch("conv2d", input.dims()).expect("validated in forward");
    let g = conv_geometry("conv2d", c, h, w, kernels.dims(), stride).expect("validated in forward");
    let (rows, p) = (g.col_rows(), g.col_cols());
    let d_b = channel_sums(grad_out.data(), g.c_out, p);
    let go_t = channel_major(grad_out.data(), n, g.c_out, p);
    let cols = batch_im2col(input.data(), n, &g);
    let mut d_k = vec![S::ZERO; kernels.len()];
    gemm_nt(g.c_out, rows, n * p, &go_t, &cols, &mut d_k);
    let mut d_cols = vec![S::ZERO; rows * n * p];
    gemm_tn(rows, n * p, g.c_out, kernels.data(), &go_t, &mut d_cols);
    let d_in = batch_col2im(&d_cols, n, &g);
    (
        Tensor::new(input.dims(), d_in).expect("same dims"),
        Tensor::new(kernels.dims(), d_k).expect("same dims"),
        Tensor::from_vec(d_b),
    )
}

fn deconv_geometry(
    op: &'static str,
    c: usize,
    h: usize,
    w: usize,
    kernels: &[usize],
    stride: usize,
) -> Result<ConvGeometry> {
    let [kc, k, kh, kw] = *kernels else {
        return Err(Error::shape(op, format!("kernel must be [C,K,kh,kw], got {kernels:?}")));
    };
    if kc != c {
        return Err(Error::shape(
            op,
            format!("channel axis: input has {c} channels, kernel expects {kc}"),
        ));
    }
    if stride == 0 || kh == 0 || kw == 0 {
        return Err(Error::shape(op, "stride and kernel sides must be positive"));
    }
    // The deconv is the adjoint of a conv from [k, H'', W''] to [c, h, w].
    Ok(ConvGeometry {
        c_in: k,
        h: deconv_out_len(h, kh, stride),
        w: deconv_out_len(w, kw, stride),
        c_out: c,
        kh,
        kw,
        stride,
        out_h: h,
        out_w: w,
    })
}

/// Transposed convolution `[N?,C,H,W] * [C,K,kh,kw] -> [N?,K,(H-1)s+kh,(W-1)s+kw]`,
/// the exact adjoint of [`conv2d`] with the same kernel tensor and stride.
pub fn deconv2d<S: Scalar>(
    input: &Tensor<S>,
    kernels: &Tensor<S>,
    bias: Option<&Tensor<S>>,
    stride: usize,
) -> Result<Tensor<S>> {
    let (n, c, h, w, batched) = split_batch("deconv2d", input.dims())?;
    let g = deconv_geometry("deconv2d", c, h, w, kernels.dims(), stride)?;
    check_bias("deconv2d", bias, g.c_in)?;
    let (rows, p) = (g.col_rows(), g.col_cols());
    let x_t = channel_major(input.data(), n, c, p);
    let mut cols = vec![S::ZERO; rows * n * p];
    gemm_tn(rows, n * p, c, kernels.data(), &x_t, &mut cols);
    let mut out = batch_col2im(&cols, n, &g);
    add_channel_bias(&mut out, bias, g.h * g.w);
    let dims = if batched {
        vec![n, g.c_in, g.h, g.w]
    } else {
        vec![g.c_in, g.h, g.w]
    };
    Tensor::new(&dims, out)
}

/// Gradients of [`deconv2d`]: `(d_input, d_kernels, d_bias)`.
pub fn deconv2d_backward<S: Scalar>(
    input: &Tensor<S>,
    kernels: &Tensor<S>,
    grad_out: &Tensor<S>,
    stride: usize,
) -> (Tensor<S>, Tensor<S>, Tensor<S>) {
    let (n, c, h, w, _) = split_batch("deconv2d", input.dims()).expect("validated in forward");
    let g = deconv_geometry("deconv2d", c, h, w, kernels.dims(), stride).expect("validated in forward");
    let (rows, p) = (g.col_rows(), g.col_cols());
    let d_b = channel_sums(grad_out.data(), g.c_in, g.h * g.w);
    let cols = batch_im2col(grad_out.data(), n, &g);
    let x_t = channel_major(input.data(), n, c, p);
    let mut d_in_t = vec![S::ZERO; c * n * p];
    gemm_nn(c, n * p, rows, kernels.data(), &cols, &mut d_in_t);
    let mut d_k = vec![S::ZERO; kernels.len()];
    gemm_nt(c, rows, n * p, &x_t, &cols, &mut d_k);
    (
        Tensor::new(input.dims(), sample_major(&d_in_t, n, c, p)).expect("same dims"),
        Tensor::new(kernels.dims(), d_k).expect("same dims"),
        Tensor::from_vec(d_b),
    )
}

/// Fully connected layer `[N?, in] -> [N?, out]` with weights `[out, in]`.
/// `bias = None` gives a pure linear map.
pub fn linear<S: Scalar>(
    input: &Tensor<S>,
    weights: &Tensor<S>,
    bias: Option<&Tensor<S>>,
) -> Result<Tensor<S>> {
    let [m, k] = *weights.dims() else {
        return Err(Error::shape("fc", format!("weights must be [M,N], got {:?}", weights.dims())));
    };
    let (n, batched) = match *input.dims() {
        [len] if len == k => (1, false),
        [rows, len] if len == k => (rows, true),
        _ => {
            return Err(Error::shape(
                "fc",
                format!("input axis: expected trailing length {k}, got dims {:?}", input.dims()),
            ))
        }
    };
    check_bias("fc", bias, m)?;
    let mut out = vec![S::ZERO; n * m];
    if let Some(b) = bias {
        for row in out.chunks_mut(m) {
            row.copy_from_slice(b.data());
        }
    }
    gemm_nt(n, m, k, input.data(), weights.data(), &mut out);
    let dims = if batched { vec![n, m] } else { vec![m] };
    Tensor::new(&dims, out)
}

/// Gradients of [`linear`]: `(d_input, d_weights, d_bias)`.
pub fn linear_backward<S: Scalar>(
    input: &Tensor<S>,
    weights: &Tensor<S>,
    grad_out: &Tensor<S>,
) -> (Tensor<S>, Tensor<S>, Tensor<S>) {
    let (m, k) = (weights.dims()[0], weights.dims()[1]);
    let n = input.len() / k;
    let mut d_in = vec![S::ZERO; input.len()];
    gemm_nn(n, k, m, grad_out.data(), weights.data(), &mut d_in);
    let mut d_w = vec![S::ZERO; weights.len()];
    gemm_tn(m, k, n, grad_out.data(), input.data(), &mut d_w);
    let mut d_b = vec![S::ZERO; m];
    for row in grad_out.data().chunks(m) {
        for (b, &g) in d_b.iter_mut().zip(row) {
            *b += g;
        }
    }
    (
        Tensor::new(input.dims(), d_in).expect("same dims"),
        Tensor::new(weights.dims(), d_w).expect("same dims"),
        Tensor::from_vec(d_b),
    )
}

pub fn relu<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    x.map(|v| if v > S::ZERO { v } else { S::ZERO })
}

/// Softmax over the last axis, with max subtraction.
pub fn softmax<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let k = *x.dims().last().expect("rank >= 1");
    let mut out: Vec<S> = Vec::with_capacity(x.len());
    for row in x.data().chunks(k) {
        softmax_row(row, &mut out);
    }
    Tensor::new(x.dims(), out).expect("same dims")
}

pub(crate) fn softmax_row<S: Scalar>(row: &[S], out: &mut Vec<S>) {
    let max = row.iter().copied().fold(row[0], S::max);
    let start = out.len();
    let mut total = S::ZERO;
    for &v in row {
        let e = (v - max).exp();
        total += e;
        out.push(e);
    }
    for v in &mut out[start..] {
        *v = *v / total;
    }
}

pub fn elementwise_mul<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    if a.dims() != b.dims() {
        return Err(Error::shape(
            "elementwise_mul",
            format!("operands differ: {:?} vs {:?}", a.dims(), b.dims()),
        ));
    }
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x * y).collect();
    Tensor::new(a.dims(), data)
}
