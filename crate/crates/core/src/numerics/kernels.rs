//! Row-level kernels.
//!
//! The autodiff graph and the cached incremental decoder both call these, so the
//! two paths perform the same floating-point operations in the same order.

use super::Array;
use crate::Scalar;

/// `out += x · w` for a row vector `x` and a 2-D `w` of shape `[x.len(), out.len()]`.
/// Accumulation runs over `x` in ascending order.
#[inline]
pub fn vec_mat<S: Scalar>(x: &[S], w: &Array<S>, out: &mut [S]) {
    let n = out.len();
    debug_assert_eq!(w.shape(), &[x.len(), n]);
    let wd = w.data();
    for (k, &a) in x.iter().enumerate() {
        let wrow = &wd[k * n..(k + 1) * n];
        for (o, &b) in out.iter_mut().zip(wrow) {
            *o += a * b;
        }
    }
}

/// Sequential dot product, matching the accumulation order of [`vec_mat`].
#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = S::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// `out += a * x`
#[inline]
pub fn axpy<S: Scalar>(a: S, x: &[S], out: &mut [S]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o += a * v;
    }
}

pub fn add_in_place<S: Scalar>(out: &mut [S], x: &[S]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o += v;
    }
}

pub fn relu_in_place<S: Scalar>(x: &mut [S]) {
    for v in x {
        if *v < S::zero() {
            *v = S::zero();
        }
    }
}

/// Numerically stable softmax over `x`, written into `out`.
pub fn softmax<S: Scalar>(x: &[S], out: &mut [S]) {
    let m = x.iter().fold(S::neg_infinity(), |m, &v| m.max(v));
    let mut sum = S::zero();
    for (o, &v) in out.iter_mut().zip(x) {
        *o = (v - m).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Log-softmax over `x`, written into `out`.
pub fn log_softmax<S: Scalar>(x: &[S], out: &mut [S]) {
    let m = x.iter().fold(S::neg_infinity(), |m, &v| m.max(v));
    let mut sum = S::zero();
    for &v in x {
        sum += (v - m).exp();
    }
    let lse = m + sum.ln();
    for (o, &v) in out.iter_mut().zip(x) {
        *o = v - lse;
    }
}

/// Layer normalization of one row. Returns `(normalized, inv_std)` where
/// `normalized` is the pre-affine value, written into `xhat`.
pub fn layer_norm<S: Scalar>(
    x: &[S],
    gain: &[S],
    bias: &[S],
    eps: S,
    xhat: &mut [S],
    out: &mut [S],
) -> S {
    let n = S::of_usize(x.len());
    let mut mean = S::zero();
    for &v in x {
        mean += v;
    }
    mean /= n;
    let mut var = S::zero();
    for &v in x {
        let d = v - mean;
        var += d * d;
    }
    var /= n;
    let inv_std = S::one() / (var + eps).sqrt();
    for i in 0..x.len() {
        xhat[i] = (x[i] - mean) * inv_std;
        out[i] = xhat[i] * gain[i] + bias[i];
    }
    inv_std
}

/// One output row of a causal 1-D convolution.
///
/// `window[k]` is the input row at time `t - (K - 1) + k`, or `None` when that
/// time lies before the sequence start (zero padding). `weight` has shape
/// `[K * C_in, C_out]` with tap-major rows.
pub fn conv_row<S: Scalar>(window: &[Option<&[S]>], weight: &Array<S>, bias: &[S], out: &mut [S]) {
    let c_out = out.len();
    let c_in = weight.rows() / window.len();
    let wd = weight.data();
    out.copy_from_slice(bias);
    for (k, row) in window.iter().enumerate() {
        if let Some(row) = row {
            for (c, &a) in row.iter().enumerate() {
                let off = (k * c_in + c) * c_out;
                for (o, &b) in out.iter_mut().zip(&wd[off..off + c_out]) {
                    *o += a * b;
                }
            }
        }
    }
}
