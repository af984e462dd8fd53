//! Discriminator forward and backward passes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::conv::{
    conv2d_backward_input, conv2d_backward_params, conv2d_forward, relu_in_place, relu_mask, Buf2,
};
use super::{DiscriminatorParams, DISC_CHANNELS, DISC_FEATURES, DISC_POOL};
use crate::math;
use crate::types::{Error, Grid2, Result};

/// Activations cached by [`discriminator_forward`].
#[derive(Debug, Clone)]
pub struct DiscCache {
    input: Buf2,
    z1: Buf2,
    a1: Buf2,
    z2: Buf2,
    pooled: Vec<f64>,
    f1z: Vec<f64>,
    f1a: Vec<f64>,
    f2z: Vec<f64>,
    f2a: Vec<f64>,
    out: f64,
}

/// Adaptive average pooling window along one axis: output cell `j` of
/// `out_n` covers input `[⌊j·n/out_n⌋, ⌈(j+1)·n/out_n⌉)`.
#[inline]
fn pool_window(j: usize, n: usize, out_n: usize) -> (usize, usize) {
    let start = j * n / out_n;
    let end = ((j + 1) * n).div_ceil(out_n);
    (start, end)
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + math::exp(-z))
}

/// Scores a slice in `(0, 1)`; higher reads as more likely real.
pub fn discriminator_forward(p: &DiscriminatorParams, slice: &Grid2) -> Result<(f64, DiscCache)> {
    if slice.width < 3 || slice.height < 3 {
        return Err(Error::DimMismatch(format!(
            "discriminator input must be at least 3x3, got {}x{}",
            slice.width, slice.height
        )));
    }
    let (h, w) = (slice.height, slice.width);
    let input = Buf2 { c: 1, h, w, data: slice.data.clone() };

    let z1 = conv2d_forward(&p.conv_1, &input);
    let mut a1 = z1.clone();
    relu_in_place(&mut a1.data);

    let z2 = conv2d_forward(&p.conv_2, &a1);
    let mut a2 = z2.clone();
    relu_in_place(&mut a2.data);

    // Adaptive average pooling to 12x12 per channel.
    let mut pooled = vec![0.0f64; DISC_FEATURES];
    for c in 0..DISC_CHANNELS {
        let plane = a2.plane(c);
        for py in 0..DISC_POOL {
            let (ys, ye) = pool_window(py, h, DISC_POOL);
            for px in 0..DISC_POOL {
                let (xs, xe) = pool_window(px, w, DISC_POOL);
                let mut acc = 0.0;
                for y in ys..ye {
                    for x in xs..xe {
                        acc += plane[y * w + x];
                    }
                }
                pooled[(c * DISC_POOL + py) * DISC_POOL + px] =
                    acc / ((ye - ys) * (xe - xs)) as f64;
            }
        }
    }

    let fc = |layer: &super::FcLayer, input: &[f64]| -> Vec<f64> {
        (0..layer.out_dim)
            .map(|o| {
                layer.b[o]
                    + layer.w[o * layer.in_dim..(o + 1) * layer.in_dim]
                        .iter()
                        .zip(input)
                        .map(|(&wv, &iv)| wv * iv)
                        .sum::<f64>()
            })
            .collect()
    };

    let f1z = fc(&p.fc_1, &pooled);
    let mut f1a = f1z.clone();
    relu_in_place(&mut f1a);
    let f2z = fc(&p.fc_2, &f1a);
    let mut f2a = f2z.clone();
    relu_in_place(&mut f2a);
    let f3z = fc(&p.fc_3, &f2a);
    let out = sigmoid(f3z[0]);

    Ok((out, DiscCache { input, z1, a1, z2, pooled, f1z, f1a, f2z, f2a, out }))
}

/// Gradients of `upstream · D(slice)` with respect to the parameters, plus
/// the gradient with respect to the input slice (for chaining through the
/// generator).
pub fn discriminator_backward(
    p: &DiscriminatorParams,
    cache: &DiscCache,
    upstream: f64,
) -> Result<(DiscriminatorParams, Grid2)> {
    let (h, w) = (cache.input.h, cache.input.w);
    let mut grads = DiscriminatorParams::zeros();

    // Sigmoid.
    let dz3 = upstream * cache.out * (1.0 - cache.out);

    // fc_3.
    for i in 0..p.fc_3.in_dim {
        grads.fc_3.w[i] = dz3 * cache.f2a[i];
    }
    grads.fc_3.b[0] = dz3;
    let mut d_f2a: Vec<f64> = p.fc_3.w.iter().map(|&wv| dz3 * wv).collect();
    relu_mask(&mut d_f2a, &cache.f2z);

    // fc_2.
    for o in 0..p.fc_2.out_dim {
        for i in 0..p.fc_2.in_dim {
            grads.fc_2.w[o * p.fc_2.in_dim + i] = d_f2a[o] * cache.f1a[i];
        }
        grads.fc_2.b[o] = d_f2a[o];
    }
    let mut d_f1a = vec![0.0f64; p.fc_2.in_dim];
    for o in 0..p.fc_2.out_dim {
        for i in 0..p.fc_2.in_dim {
            d_f1a[i] += d_f2a[o] * p.fc_2.w[o * p.fc_2.in_dim + i];
        }
    }
    relu_mask(&mut d_f1a, &cache.f1z);

    // fc_1.
    for o in 0..p.fc_1.out_dim {
        for i in 0..p.fc_1.in_dim {
            grads.fc_1.w[o * p.fc_1.in_dim + i] = d_f1a[o] * cache.pooled[i];
        }
        grads.fc_1.b[o] = d_f1a[o];
    }
    let mut d_pooled = vec![0.0f64; p.fc_1.in_dim];
    for o in 0..p.fc_1.out_dim {
        for i in 0..p.fc_1.in_dim {
            d_pooled[i] += d_f1a[o] * p.fc_1.w[o * p.fc_1.in_dim + i];
        }
    }

    // Pooling: spread each pooled gradient uniformly over its window.
    let mut d_a2 = Buf2::zeros(DISC_CHANNELS, h, w);
    for c in 0..DISC_CHANNELS {
        let base = c * h * w;
        for py in 0..DISC_POOL {
            let (ys, ye) = pool_window(py, h, DISC_POOL);
            for px in 0..DISC_POOL {
                let (xs, xe) = pool_window(px, w, DISC_POOL);
                let g = d_pooled[(c * DISC_POOL + py) * DISC_POOL + px]
                    / ((ye - ys) * (xe - xs)) as f64;
                for y in ys..ye {
                    for x in xs..xe {
                        d_a2.data[base + y * w + x] += g;
                    }
                }
            }
        }
    }
    relu_mask(&mut d_a2.data, &cache.z2.data);

    // conv_2.
    grads.conv_2 = conv2d_backward_params(&p.conv_2, &cache.a1, &d_a2);
    let mut d_a1 = conv2d_backward_input(&p.conv_2, &d_a2);
    relu_mask(&mut d_a1.data, &cache.z1.data);

    // conv_1 and the input gradient.
    grads.conv_1 = conv2d_backward_params(&p.conv_1, &cache.input, &d_a1);
    let d_input = conv2d_backward_input(&p.conv_1, &d_a1);

    Ok((grads, Grid2 { width: w, height: h, data: d_input.data }))
}
