//! Generator forward and backward passes.

use alloc::format;

use super::conv::{
    conv2d_backward_input, conv2d_backward_params, conv2d_forward, conv3d_backward_input,
    conv3d_backward_params, conv3d_forward, relu_in_place, relu_mask, Buf2, Buf3,
};
use super::{GeneratorParams, GEN_C3D, GEN_C_FLAT, GEN_DEPTH};
use crate::types::{Error, Grid2, Result, Subvolume};

/// Activations cached by [`generator_forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct GenCache {
    input: Buf3,
    z1: Buf3,
    a1: Buf3,
    z2: Buf3,
    a2_flat: Buf2,
    z3: Buf2,
    a3: Buf2,
}

/// Runs the generator on one subvolume, returning the predicted central
/// slice and the cache needed for [`generator_backward`].
pub fn generator_forward(p: &GeneratorParams, sub: &Subvolume) -> Result<(Grid2, GenCache)> {
    if sub.pz != GEN_DEPTH {
        return Err(Error::DimMismatch(format!(
            "generator expects depth {GEN_DEPTH} subvolumes, got {}",
            sub.pz
        )));
    }
    if sub.px < 3 || sub.py < 3 {
        return Err(Error::DimMismatch(format!(
            "in-plane dims must be at least 3x3, got {}x{}",
            sub.px, sub.py
        )));
    }
    let (h, w) = (sub.py, sub.px);

    let mut input = Buf3::zeros(1, GEN_DEPTH, h, w);
    for (dst, &src) in input.data.iter_mut().zip(&sub.data) {
        *dst = src as f64;
    }

    let z1 = conv3d_forward(&p.conv3d_1, &input); // depth 8 -> 6
    let mut a1 = z1.clone();
    relu_in_place(&mut a1.data);

    let z2 = conv3d_forward(&p.conv3d_2, &a1); // depth 6 -> 4
    let mut a2 = z2.clone();
    relu_in_place(&mut a2.data);

    // [8][4][h][w] reads as [32][h][w] without moving data.
    debug_assert_eq!(a2.c * a2.d, GEN_C_FLAT);
    let a2_flat = Buf2 { c: GEN_C_FLAT, h, w, data: a2.data };

    let z3 = conv2d_forward(&p.conv2d_1, &a2_flat);
    let mut a3 = z3.clone();
    relu_in_place(&mut a3.data);

    let out = conv2d_forward(&p.conv2d_2, &a3); // linear head, 1 channel

    let slice = Grid2 { width: w, height: h, data: out.data };
    Ok((slice, GenCache { input, z1, a1, z2, a2_flat, z3, a3 }))
}

/// Gradients of `⟨upstream, G(sub)⟩` with respect to every generator
/// parameter, given the cache of the matching forward pass.
pub fn generator_backward(
    p: &GeneratorParams,
    cache: &GenCache,
    upstream: &Grid2,
) -> Result<GeneratorParams> {
    let (h, w) = (cache.input.h, cache.input.w);
    if upstream.width != w || upstream.height != h {
        return Err(Error::DimMismatch(format!(
            "upstream gradient {}x{} does not match forward pass {}x{}",
            upstream.width, upstream.height, w, h
        )));
    }

    let mut grads = GeneratorParams::zeros();
    let g_out = Buf2 { c: 1, h, w, data: upstream.data.clone() };

    // conv2d_2 (linear head)
    grads.conv2d_2 = conv2d_backward_params(&p.conv2d_2, &cache.a3, &g_out);
    let mut g_a3 = conv2d_backward_input(&p.conv2d_2, &g_out);
    relu_mask(&mut g_a3.data, &cache.z3.data);

    // conv2d_1
    grads.conv2d_1 = conv2d_backward_params(&p.conv2d_1, &cache.a2_flat, &g_a3);
    let g_a2_flat = conv2d_backward_input(&p.conv2d_1, &g_a3);
    let mut g_a2 = Buf3 { c: GEN_C3D, d: GEN_DEPTH - 4, h, w, data: g_a2_flat.data };
    relu_mask(&mut g_a2.data, &cache.z2.data);

    // conv3d_2
    grads.conv3d_2 = conv3d_backward_params(&p.conv3d_2, &cache.a1, &g_a2);
    let mut g_a1 = conv3d_backward_input(&p.conv3d_2, &g_a2, GEN_DEPTH - 2);
    relu_mask(&mut g_a1.data, &cache.z1.data);

    // conv3d_1 (input gradient not needed)
    grads.conv3d_1 = conv3d_backward_params(&p.conv3d_1, &cache.input, &g_a1);

    Ok(grads)
}
