//! Shared compute kernels.
//!
//! Every kernel is written once, generic over the element type: the f32
//! instantiation backs the tape and the evaluation paths, the f64
//! instantiation backs the shadow evaluator used by gradient-check tests.
//! Kernels never reduce across threads, so results are bitwise identical for
//! any worker count.

use rayon::prelude::*;

/// Element type for kernels. Implemented for `f32` and `f64`.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + PartialOrd
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f32(x: f32) -> Self;
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;
            #[inline]
            fn from_f32(x: f32) -> Self {
                x as $t
            }
            #[inline]
            fn from_f64(x: f64) -> Self {
                x as $t
            }
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn sqrt(self) -> Self {
                <$t>::sqrt(self)
            }
            #[inline]
            fn exp(self) -> Self {
                <$t>::exp(self)
            }
            #[inline]
            fn ln(self) -> Self {
                <$t>::ln(self)
            }
            #[inline]
            fn tanh(self) -> Self {
                <$t>::tanh(self)
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

/// Work threshold below which kernels stay single-threaded.
const PAR_MIN_WORK: usize = 1 << 15;

/// Four-lane dot product; the split accumulators let the compiler vectorize
/// the reduction.
#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::ZERO; 4];
    let mut chunks_a = a.chunks_exact(4);
    let mut chunks_b = b.chunks_exact(4);
    for (ca, cb) in (&mut chunks_a).zip(&mut chunks_b) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    let mut tail = T::ZERO;
    for (&x, &y) in chunks_a.remainder().iter().zip(chunks_b.remainder()) {
        tail += x * y;
    }
    acc[0] + acc[1] + (acc[2] + acc[3] + tail)
}

// ---------------------------------------------------------------------------
// Dense matrix products
// ---------------------------------------------------------------------------

/// out[m,n] = a[m,k] * b[k,n]
pub fn matmul<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize, out: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    let row = |(i, out_row): (usize, &mut [T])| {
        out_row.iter_mut().for_each(|o| *o = T::ZERO);
        let a_row = &a[i * k..(i + 1) * k];
        for (kk, &aik) in a_row.iter().enumerate() {
            let b_row = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aik * bv;
            }
        }
    };
    if m * k * n >= PAR_MIN_WORK {
        out.par_chunks_mut(n).enumerate().for_each(row);
    } else {
        out.chunks_mut(n).enumerate().for_each(row);
    }
}

/// out[m,k] = a[m,n] * b[k,n]^T   (i.e. a · bᵀ)
pub fn matmul_bt<T: Scalar>(a: &[T], b: &[T], m: usize, n: usize, k: usize, out: &mut [T]) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * k);
    let row = |(i, out_row): (usize, &mut [T])| {
        let a_row = &a[i * n..(i + 1) * n];
        for (kk, o) in out_row.iter_mut().enumerate() {
            *o = dot(a_row, &b[kk * n..(kk + 1) * n]);
        }
    };
    if m * n * k >= PAR_MIN_WORK {
        out.par_chunks_mut(k).enumerate().for_each(row);
    } else {
        out.chunks_mut(k).enumerate().for_each(row);
    }
}

/// out[k,n] = a[m,k]^T * b[m,n]   (i.e. aᵀ · b)
pub fn matmul_at<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize, out: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(out.len(), k * n);
    let row = |(i, out_row): (usize, &mut [T])| {
        out_row.iter_mut().for_each(|o| *o = T::ZERO);
        for mm in 0..m {
            let aval = a[mm * k + i];
            let b_row = &b[mm * n..(mm + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aval * bv;
            }
        }
    };
    if m * k * n >= PAR_MIN_WORK {
        out.par_chunks_mut(n).enumerate().for_each(row);
    } else {
        out.chunks_mut(n).enumerate().for_each(row);
    }
}

/// Broadcast-add a length-`cols` vector to every row of `x`.
pub fn add_row_vec<T: Scalar>(x: &mut [T], v: &[T], cols: usize) {
    debug_assert_eq!(x.len() % cols, 0);
    for row in x.chunks_mut(cols) {
        for (o, &b) in row.iter_mut().zip(v) {
            *o += b;
        }
    }
}

// ---------------------------------------------------------------------------
// 1-D convolution, stride 1, zero same-padding
// ---------------------------------------------------------------------------

/// x: [b, c_in, l], w: [c_out, c_in, k], bias: [c_out] -> out: [b, c_out, l].
/// `pad = (k-1)/2` keeps the length for odd kernels.
pub fn conv1d<T: Scalar>(
    x: &[T],
    w: &[T],
    bias: &[T],
    b: usize,
    c_in: usize,
    l: usize,
    c_out: usize,
    k: usize,
    pad: usize,
    out: &mut [T],
) {
    debug_assert_eq!(x.len(), b * c_in * l);
    debug_assert_eq!(w.len(), c_out * c_in * k);
    debug_assert_eq!(out.len(), b * c_out * l);
    let sample = |(bi, out_s): (usize, &mut [T])| {
        let x_s = &x[bi * c_in * l..(bi + 1) * c_in * l];
        for co in 0..c_out {
            let out_c = &mut out_s[co * l..(co + 1) * l];
            out_c.iter_mut().for_each(|o| *o = bias[co]);
            for ci in 0..c_in {
                let x_c = &x_s[ci * l..(ci + 1) * l];
                for kk in 0..k {
                    let wv = w[(co * c_in + ci) * k + kk];
                    // out[t] += wv * x[t + kk - pad] over the valid range
                    let (t0, s0) = if kk >= pad { (0, kk - pad) } else { (pad - kk, 0) };
                    let span = (l - s0).min(l - t0);
                    let dst = &mut out_c[t0..t0 + span];
                    let src = &x_c[s0..s0 + span];
                    for (o, &xv) in dst.iter_mut().zip(src) {
                        *o += wv * xv;
                    }
                }
            }
        }
    };
    if b * c_out * c_in * k * l >= PAR_MIN_WORK {
        out.par_chunks_mut(c_out * l).enumerate().for_each(sample);
    } else {
        out.chunks_mut(c_out * l).enumerate().for_each(sample);
    }
}

/// Gradient w.r.t. the convolution input: correlation of `g` with the kernel
/// flipped in both the tap and channel-pairing sense.
pub fn conv1d_grad_x<T: Scalar>(
    g: &[T],
    w: &[T],
    b: usize,
    c_in: usize,
    l: usize,
    c_out: usize,
    k: usize,
    pad: usize,
    gx: &mut [T],
) {
    debug_assert_eq!(g.len(), b * c_out * l);
    debug_assert_eq!(gx.len(), b * c_in * l);
    let sample = |(bi, gx_s): (usize, &mut [T])| {
        gx_s.iter_mut().for_each(|o| *o = T::ZERO);
        let g_s = &g[bi * c_out * l..(bi + 1) * c_out * l];
        for co in 0..c_out {
            let g_c = &g_s[co * l..(co + 1) * l];
            for ci in 0..c_in {
                let gx_c = &mut gx_s[ci * l..(ci + 1) * l];
                for kk in 0..k {
                    let wv = w[(co * c_in + ci) * k + kk];
                    // forward: out[t] += wv * x[t + kk - pad]
                    // so: gx[s] += wv * g[s - kk + pad]
                    let (s0, t0) = if kk >= pad { (0, kk - pad) } else { (pad - kk, 0) };
                    let span = (l - s0).min(l - t0);
                    let dst = &mut gx_c[s0..s0 + span];
                    let src = &g_c[t0..t0 + span];
                    for (o, &gv) in dst.iter_mut().zip(src) {
                        *o += wv * gv;
                    }
                }
            }
        }
    };
    if b * c_out * c_in * k * l >= PAR_MIN_WORK {
        gx.par_chunks_mut(c_in * l).enumerate().for_each(sample);
    } else {
        gx.chunks_mut(c_in * l).enumerate().for_each(sample);
    }
}

/// Gradient w.r.t. the convolution weights.
pub fn conv1d_grad_w<T: Scalar>(
    x: &[T],
    g: &[T],
    b: usize,
    c_in: usize,
    l: usize,
    c_out: usize,
    k: usize,
    pad: usize,
    gw: &mut [T],
) {
    debug_assert_eq!(gw.len(), c_out * c_in * k);
    let per_co = |(co, gw_c): (usize, &mut [T])| {
        gw_c.iter_mut().for_each(|o| *o = T::ZERO);
        for bi in 0..b {
            let g_c = &g[(bi * c_out + co) * l..(bi * c_out + co + 1) * l];
            for ci in 0..c_in {
                let x_c = &x[(bi * c_in + ci) * l..(bi * c_in + ci + 1) * l];
                for kk in 0..k {
                    let (t0, s0) = if kk >= pad { (0, kk - pad) } else { (pad - kk, 0) };
                    let span = (l - s0).min(l - t0);
                    gw_c[ci * k + kk] += dot(&g_c[t0..t0 + span], &x_c[s0..s0 + span]);
                }
            }
        }
    };
    if b * c_out * c_in * k * l >= PAR_MIN_WORK {
        gw.par_chunks_mut(c_in * k).enumerate().for_each(per_co);
    } else {
        gw.chunks_mut(c_in * k).enumerate().for_each(per_co);
    }
}

/// Gradient w.r.t. the convolution bias: sum of `g` over batch and length.
pub fn conv1d_grad_b<T: Scalar>(g: &[T], b: usize, c_out: usize, l: usize, gb: &mut [T]) {
    debug_assert_eq!(gb.len(), c_out);
    gb.iter_mut().for_each(|o| *o = T::ZERO);
    for bi in 0..b {
        for co in 0..c_out {
            let g_c = &g[(bi * c_out + co) * l..(bi * c_out + co + 1) * l];
            let mut acc = T::ZERO;
            for &gv in g_c {
                acc += gv;
            }
            gb[co] += acc;
        }
    }
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

/// How features map onto a tensor for batch normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnLayout {
    /// `[batch, features]`: statistics over the batch axis.
    Feature2d { batch: usize, features: usize },
    /// `[batch, channels, len]`: statistics over batch and length per channel.
    Channel3d { batch: usize, channels: usize, len: usize },
}

impl BnLayout {
    pub fn features(&self) -> usize {
        match *self {
            BnLayout::Feature2d { features, .. } => features,
            BnLayout::Channel3d { channels, .. } => channels,
        }
    }

    /// Number of elements reduced per feature.
    pub fn group_size(&self) -> usize {
        match *self {
            BnLayout::Feature2d { batch, .. } => batch,
            BnLayout::Channel3d { batch, len, .. } => batch * len,
        }
    }

    fn for_each_feature<T: Scalar>(&self, x: &[T], f: usize, mut visit: impl FnMut(usize, T)) {
        match *self {
            BnLayout::Feature2d { batch, features } => {
                for bi in 0..batch {
                    let idx = bi * features + f;
                    visit(idx, x[idx]);
                }
            }
            BnLayout::Channel3d { batch, channels, len } => {
                for bi in 0..batch {
                    let base = (bi * channels + f) * len;
                    for t in 0..len {
                        visit(base + t, x[base + t]);
                    }
                }
            }
        }
    }
}

/// Per-feature mean and biased variance over the reduction group.
pub fn bn_batch_stats<T: Scalar>(x: &[T], layout: BnLayout) -> (Vec<T>, Vec<T>) {
    let nf = layout.features();
    let m = T::from_f64(layout.group_size() as f64);
    let mut mean = vec![T::ZERO; nf];
    let mut var = vec![T::ZERO; nf];
    for f in 0..nf {
        let mut s = T::ZERO;
        layout.for_each_feature(x, f, |_, v| s += v);
        mean[f] = s / m;
        let mu = mean[f];
        let mut s2 = T::ZERO;
        layout.for_each_feature(x, f, |_, v| {
            let d = v - mu;
            s2 += d * d;
        });
        var[f] = s2 / m;
    }
    (mean, var)
}

/// y = gamma * (x - mean) / sqrt(var + eps) + beta
pub fn bn_normalize<T: Scalar>(
    x: &[T],
    mean: &[T],
    var: &[T],
    gamma: &[T],
    beta: &[T],
    eps: T,
    layout: BnLayout,
    out: &mut [T],
) {
    let nf = layout.features();
    for f in 0..nf {
        let inv_std = T::ONE / (var[f] + eps).sqrt();
        let (g, b, mu) = (gamma[f], beta[f], mean[f]);
        layout.for_each_feature(x, f, |idx, v| {
            out[idx] = g * (v - mu) * inv_std + b;
        });
    }
}

/// Train-mode batchnorm backward using the saved batch statistics.
///
/// dx_i = gamma * inv_std * (g_i - mean(g) - xhat_i * mean(g * xhat))
pub fn bn_backward<T: Scalar>(
    x: &[T],
    g: &[T],
    mean: &[T],
    var: &[T],
    gamma: &[T],
    eps: T,
    layout: BnLayout,
    gx: &mut [T],
    ggamma: &mut [T],
    gbeta: &mut [T],
) {
    let nf = layout.features();
    let m = T::from_f64(layout.group_size() as f64);
    for f in 0..nf {
        let inv_std = T::ONE / (var[f] + eps).sqrt();
        let mu = mean[f];
        let mut sum_g = T::ZERO;
        let mut sum_gx = T::ZERO;
        layout.for_each_feature(x, f, |idx, v| {
            let xhat = (v - mu) * inv_std;
            sum_g += g[idx];
            sum_gx += g[idx] * xhat;
        });
        ggamma[f] = sum_gx;
        gbeta[f] = sum_g;
        let mean_g = sum_g / m;
        let mean_gx = sum_gx / m;
        let scale = gamma[f] * inv_std;
        layout.for_each_feature(x, f, |idx, v| {
            let xhat = (v - mu) * inv_std;
            gx[idx] = scale * (g[idx] - mean_g - xhat * mean_gx);
        });
    }
}

/// Eval-mode batchnorm backward: the statistics are constants, so the map is
/// affine in x per feature.
pub fn bn_backward_eval<T: Scalar>(
    x: &[T],
    g: &[T],
    mean: &[T],
    var: &[T],
    gamma: &[T],
    eps: T,
    layout: BnLayout,
    gx: &mut [T],
    ggamma: &mut [T],
    gbeta: &mut [T],
) {
    let nf = layout.features();
    for f in 0..nf {
        let inv_std = T::ONE / (var[f] + eps).sqrt();
        let mu = mean[f];
        let scale = gamma[f] * inv_std;
        let mut sum_g = T::ZERO;
        let mut sum_gx = T::ZERO;
        layout.for_each_feature(x, f, |idx, v| {
            sum_g += g[idx];
            sum_gx += g[idx] * (v - mu) * inv_std;
            gx[idx] = scale * g[idx];
        });
        ggamma[f] = sum_gx;
        gbeta[f] = sum_g;
    }
}

// ---------------------------------------------------------------------------
// Orthonormal Haar DWT / IWT on the trailing axis
// ---------------------------------------------------------------------------

/// x: [.., c, l] -> out: [.., 2c, l/2]; low bands in channels 0..c, high in c..2c.
pub fn dwt1<T: Scalar>(x: &[T], groups: usize, c: usize, l: usize, out: &mut [T]) {
    debug_assert_eq!(l % 2, 0);
    debug_assert_eq!(x.len(), groups * c * l);
    debug_assert_eq!(out.len(), groups * c * l);
    let h = l / 2;
    let r = T::from_f64(std::f64::consts::FRAC_1_SQRT_2);
    for gi in 0..groups {
        let x_g = &x[gi * c * l..(gi + 1) * c * l];
        let out_g = &mut out[gi * 2 * c * h..(gi + 1) * 2 * c * h];
        for ci in 0..c {
            let x_c = &x_g[ci * l..(ci + 1) * l];
            for t in 0..h {
                let a = x_c[2 * t];
                let b = x_c[2 * t + 1];
                out_g[ci * h + t] = (a + b) * r;
                out_g[(c + ci) * h + t] = (a - b) * r;
            }
        }
    }
}

/// Exact inverse of [`dwt1`]: coeffs [.., 2c, l/2] -> [.., c, l].
pub fn iwt1<T: Scalar>(coeffs: &[T], groups: usize, c2: usize, h: usize, out: &mut [T]) {
    debug_assert_eq!(c2 % 2, 0);
    let c = c2 / 2;
    let l = h * 2;
    debug_assert_eq!(coeffs.len(), groups * c2 * h);
    debug_assert_eq!(out.len(), groups * c * l);
    let r = T::from_f64(std::f64::consts::FRAC_1_SQRT_2);
    for gi in 0..groups {
        let c_g = &coeffs[gi * c2 * h..(gi + 1) * c2 * h];
        let out_g = &mut out[gi * c * l..(gi + 1) * c * l];
        for ci in 0..c {
            let low = &c_g[ci * h..(ci + 1) * h];
            let high = &c_g[(c + ci) * h..(c + ci + 1) * h];
            let out_c = &mut out_g[ci * l..(ci + 1) * l];
            for t in 0..h {
                out_c[2 * t] = (low[t] + high[t]) * r;
                out_c[2 * t + 1] = (low[t] - high[t]) * r;
            }
        }
    }
}
