//! Convolution primitives for the fixed destreaking architecture.
//!
//! All kernels are 3×3(×3), stride 1, same-padded in-plane; 3D convolutions
//! are valid (unpadded) along z. Everything runs in f64 so gradient checks
//! against central finite differences hold at tight tolerances. Row
//! operations fuse the three horizontal taps into one stencil pass, which
//! the compiler vectorizes well; summation orders are fixed, so results are
//! deterministic.

use alloc::vec;
use alloc::vec::Vec;

use super::{ConvLayer, TAPS_2D, TAPS_3D};

/// Channel-major 3D activation buffer, layout `[c][d][h][w]`.
#[derive(Debug, Clone)]
pub(crate) struct Buf3 {
    pub c: usize,
    pub d: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Buf3 {
    pub fn zeros(c: usize, d: usize, h: usize, w: usize) -> Self {
        Self { c, d, h, w, data: vec![0.0; c * d * h * w] }
    }

    #[inline]
    pub fn plane(&self, c: usize, d: usize) -> &[f64] {
        let n = self.h * self.w;
        let base = (c * self.d + d) * n;
        &self.data[base..base + n]
    }
}

/// Channel-major 2D activation buffer, layout `[c][h][w]`.
#[derive(Debug, Clone)]
pub(crate) struct Buf2 {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Buf2 {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self { c, h, w, data: vec![0.0; c * h * w] }
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.h * self.w;
        &self.data[c * n..(c + 1) * n]
    }
}

/// `out[x] += w0·in[x−1] + w1·in[x] + w2·in[x+1]` with zero padding.
#[inline]
fn stencil_row_add(out: &mut [f64], inp: &[f64], w: [f64; 3]) {
    let n = out.len();
    if n == 0 {
        return;
    }
    if n == 1 {
        out[0] += w[1] * inp[0];
        return;
    }
    out[0] += w[1] * inp[0] + w[2] * inp[1];
    for x in 1..n - 1 {
        out[x] += w[0] * inp[x - 1] + w[1] * inp[x] + w[2] * inp[x + 1];
    }
    out[n - 1] += w[0] * inp[n - 2] + w[1] * inp[n - 1];
}

/// `d[k] = Σ_x g[x] · in[x + k − 1]` for k ∈ {0, 1, 2}, zero-padded,
/// accumulated into `acc`.
#[inline]
fn stencil_row_dots(acc: &mut [f64; 3], g: &[f64], inp: &[f64]) {
    let n = g.len();
    if n == 0 {
        return;
    }
    if n == 1 {
        acc[1] += g[0] * inp[0];
        return;
    }
    let mut d0 = 0.0f64;
    let mut d1 = 0.0f64;
    let mut d2 = 0.0f64;
    d1 += g[0] * inp[0];
    d2 += g[0] * inp[1];
    for x in 1..n - 1 {
        d0 += g[x] * inp[x - 1];
        d1 += g[x] * inp[x];
        d2 += g[x] * inp[x + 1];
    }
    d0 += g[n - 1] * inp[n - 2];
    d1 += g[n - 1] * inp[n - 1];
    acc[0] += d0;
    acc[1] += d1;
    acc[2] += d2;
}

/// Adds a full same-padded 3×3 plane convolution of `in_plane` (weights
/// `w[ky][kx]` flattened row-major) into `out_plane`.
#[inline]
fn conv_plane_add(out_plane: &mut [f64], in_plane: &[f64], w9: &[f64], h: usize, w: usize) {
    for ky in 0..3usize {
        let dy = ky as isize - 1;
        let taps = [w9[ky * 3], w9[ky * 3 + 1], w9[ky * 3 + 2]];
        let y_lo = (-dy).max(0) as usize;
        let y_hi = ((h as isize - dy).min(h as isize)) as usize;
        for y in y_lo..y_hi {
            let iy = (y as isize + dy) as usize;
            stencil_row_add(&mut out_plane[y * w..(y + 1) * w], &in_plane[iy * w..(iy + 1) * w], taps);
        }
    }
}

/// Transposed counterpart: spreads `g_plane` back through the same 3×3
/// kernel into `in_grad_plane`.
#[inline]
fn conv_plane_add_transposed(in_grad: &mut [f64], g_plane: &[f64], w9: &[f64], h: usize, w: usize) {
    for ky in 0..3usize {
        let dy = ky as isize - 1;
        // Reverse the horizontal taps; the vertical shift flips too.
        let taps = [w9[ky * 3 + 2], w9[ky * 3 + 1], w9[ky * 3]];
        let y_lo = (-dy).max(0) as usize;
        let y_hi = ((h as isize - dy).min(h as isize)) as usize;
        for y in y_lo..y_hi {
            let iy = (y as isize + dy) as usize;
            stencil_row_add(&mut in_grad[iy * w..(iy + 1) * w], &g_plane[y * w..(y + 1) * w], taps);
        }
    }
}

/// Accumulates the 3×3 weight gradients for one (grad plane, input plane)
/// pair into `acc9`.
#[inline]
fn conv_plane_dots(acc9: &mut [f64], g_plane: &[f64], in_plane: &[f64], h: usize, w: usize) {
    for ky in 0..3usize {
        let dy = ky as isize - 1;
        let mut acc = [0.0f64; 3];
        let y_lo = (-dy).max(0) as usize;
        let y_hi = ((h as isize - dy).min(h as isize)) as usize;
        for y in y_lo..y_hi {
            let iy = (y as isize + dy) as usize;
            stencil_row_dots(&mut acc, &g_plane[y * w..(y + 1) * w], &in_plane[iy * w..(iy + 1) * w]);
        }
        acc9[ky * 3] += acc[0];
        acc9[ky * 3 + 1] += acc[1];
        acc9[ky * 3 + 2] += acc[2];
    }
}

// ---- 3D convolution: same-pad in-plane, valid in z (depth shrinks by 2) ----

pub(crate) fn conv3d_forward(layer: &ConvLayer, input: &Buf3) -> Buf3 {
    debug_assert_eq!(layer.in_c, input.c);
    debug_assert_eq!(layer.taps, TAPS_3D);
    let (h, w) = (input.h, input.w);
    let d_out = input.d - 2;
    let mut out = Buf3::zeros(layer.out_c, d_out, h, w);
    let plane = h * w;

    for oc in 0..layer.out_c {
        for od in 0..d_out {
            let base = (oc * d_out + od) * plane;
            out.data[base..base + plane].fill(layer.b[oc]);
            for ic in 0..input.c {
                for kz in 0..3 {
                    let wbase = ((oc * layer.in_c + ic) * 3 + kz) * 9;
                    conv_plane_add(
                        &mut out.data[base..base + plane],
                        input.plane(ic, od + kz),
                        &layer.w[wbase..wbase + 9],
                        h,
                        w,
                    );
                }
            }
        }
    }
    out
}

pub(crate) fn conv3d_backward_input(layer: &ConvLayer, grad_out: &Buf3, d_in: usize) -> Buf3 {
    let (h, w) = (grad_out.h, grad_out.w);
    let d_out = grad_out.d;
    debug_assert_eq!(d_out + 2, d_in);
    let mut grad_in = Buf3::zeros(layer.in_c, d_in, h, w);
    let plane = h * w;

    for oc in 0..layer.out_c {
        for od in 0..d_out {
            let g_plane = grad_out.plane(oc, od);
            for ic in 0..layer.in_c {
                for kz in 0..3 {
                    let base = (ic * d_in + od + kz) * plane;
                    let wbase = ((oc * layer.in_c + ic) * 3 + kz) * 9;
                    conv_plane_add_transposed(
                        &mut grad_in.data[base..base + plane],
                        g_plane,
                        &layer.w[wbase..wbase + 9],
                        h,
                        w,
                    );
                }
            }
        }
    }
    grad_in
}

pub(crate) fn conv3d_backward_params(layer: &ConvLayer, input: &Buf3, grad_out: &Buf3) -> ConvLayer {
    let (h, w) = (input.h, input.w);
    let d_out = grad_out.d;
    let mut grads = ConvLayer::zeros_like(layer);

    for oc in 0..layer.out_c {
        let mut db = 0.0f64;
        for od in 0..d_out {
            let g_plane = grad_out.plane(oc, od);
            db += g_plane.iter().sum::<f64>();
            for ic in 0..input.c {
                for kz in 0..3 {
                    let wbase = ((oc * layer.in_c + ic) * 3 + kz) * 9;
                    conv_plane_dots(
                        &mut grads.w[wbase..wbase + 9],
                        g_plane,
                        input.plane(ic, od + kz),
                        h,
                        w,
                    );
                }
            }
        }
        grads.b[oc] = db;
    }
    grads
}

// ---- 2D convolution: same-pad, stride 1 ----

pub(crate) fn conv2d_forward(layer: &ConvLayer, input: &Buf2) -> Buf2 {
    debug_assert_eq!(layer.in_c, input.c);
    debug_assert_eq!(layer.taps, TAPS_2D);
    let (h, w) = (input.h, input.w);
    let mut out = Buf2::zeros(layer.out_c, h, w);
    let plane = h * w;

    for oc in 0..layer.out_c {
        let base = oc * plane;
        out.data[base..base + plane].fill(layer.b[oc]);
        for ic in 0..input.c {
            let wbase = (oc * layer.in_c + ic) * 9;
            conv_plane_add(
                &mut out.data[base..base + plane],
                input.plane(ic),
                &layer.w[wbase..wbase + 9],
                h,
                w,
            );
        }
    }
    out
}

pub(crate) fn conv2d_backward_input(layer: &ConvLayer, grad_out: &Buf2) -> Buf2 {
    let (h, w) = (grad_out.h, grad_out.w);
    let mut grad_in = Buf2::zeros(layer.in_c, h, w);
    let plane = h * w;

    for oc in 0..layer.out_c {
        let g_plane = grad_out.plane(oc);
        for ic in 0..layer.in_c {
            let base = ic * plane;
            let wbase = (oc * layer.in_c + ic) * 9;
            conv_plane_add_transposed(
                &mut grad_in.data[base..base + plane],
                g_plane,
                &layer.w[wbase..wbase + 9],
                h,
                w,
            );
        }
    }
    grad_in
}

pub(crate) fn conv2d_backward_params(layer: &ConvLayer, input: &Buf2, grad_out: &Buf2) -> ConvLayer {
    let (h, w) = (input.h, input.w);
    let mut grads = ConvLayer::zeros_like(layer);

    for oc in 0..layer.out_c {
        let g_plane = grad_out.plane(oc);
        grads.b[oc] = g_plane.iter().sum::<f64>();
        for ic in 0..input.c {
            let wbase = (oc * layer.in_c + ic) * 9;
            conv_plane_dots(&mut grads.w[wbase..wbase + 9], g_plane, input.plane(ic), h, w);
        }
    }
    grads
}

// ---- elementwise ----

pub(crate) fn relu_in_place(v: &mut [f64]) {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Masks `grad` by the ReLU activity of `pre` (gradient 0 where `pre ≤ 0`).
pub(crate) fn relu_mask(grad: &mut [f64], pre: &[f64]) {
    for (g, &p) in grad.iter_mut().zip(pre) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
}
