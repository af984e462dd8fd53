//! The destreaking generator and its discriminator, with explicit forward
//! and backward passes — no autodiff framework.
//!
//! The generator maps an 8-slice 3D subvolume to a clean 2D estimate of its
//! central slice: two 3×3×3 convolutions with valid z (depth 8 → 6 → 4)
//! and ReLU, the remaining depth folded into channels (8·4 = 32), then two
//! same-padded 3×3 2D convolutions (32 → 16 → 1), the last one linear.
//!
//! The discriminator is a small classifier: two same-padded 3×3
//! convolutions with 8 filters each, adaptive average pooling to 12×12
//! (8·12·12 = 1152 features regardless of slice size), then fully connected
//! layers 1152 → 8 → 8 → 1 with a final sigmoid.
//!
//! Parameters live in f64; the on-disk format is little-endian f32 in
//! declared field order (see [`GeneratorParams::flatten`]), handled by the
//! IO layer.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::math;
use crate::types::{Error, Result};

pub(crate) mod conv;
mod discriminator;
mod generator;

pub use discriminator::{discriminator_backward, discriminator_forward, DiscCache};
pub use generator::{generator_backward, generator_forward, GenCache};

pub(crate) const TAPS_3D: usize = 27;
pub(crate) const TAPS_2D: usize = 9;

/// Subvolume depth the generator expects.
pub const GEN_DEPTH: usize = 8;
/// Channels carried by the two 3D stages.
pub const GEN_C3D: usize = 8;
/// Flattened 2D channels after folding the residual depth (8 · 4).
pub const GEN_C_FLAT: usize = GEN_C3D * (GEN_DEPTH - 4);
/// Channels of the first 2D stage.
pub const GEN_C2D: usize = 16;

pub const DISC_CHANNELS: usize = 8;
/// Adaptive pooling output edge; 8 · 12 · 12 = 1152 features.
pub const DISC_POOL: usize = 12;
pub const DISC_FEATURES: usize = DISC_CHANNELS * DISC_POOL * DISC_POOL;
pub const DISC_HIDDEN: usize = 8;

/// One convolution layer's weights `[out_c][in_c][taps]` and per-output
/// biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub out_c: usize,
    pub in_c: usize,
    pub taps: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl ConvLayer {
    fn new(out_c: usize, in_c: usize, taps: usize) -> Self {
        Self { out_c, in_c, taps, w: vec![0.0; out_c * in_c * taps], b: vec![0.0; out_c] }
    }

    pub(crate) fn zeros_like(other: &Self) -> Self {
        Self::new(other.out_c, other.in_c, other.taps)
    }
}

/// One fully connected layer, weights `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FcLayer {
    pub out_dim: usize,
    pub in_dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl FcLayer {
    fn new(out_dim: usize, in_dim: usize) -> Self {
        Self { out_dim, in_dim, w: vec![0.0; out_dim * in_dim], b: vec![0.0; out_dim] }
    }
}

/// All generator weights and biases. The declared field order — each
/// layer's weights then biases, in forward order — is the serialization
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub conv3d_1: ConvLayer,
    pub conv3d_2: ConvLayer,
    pub conv2d_1: ConvLayer,
    pub conv2d_2: ConvLayer,
}

/// All discriminator weights and biases; same ordering convention.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorParams {
    pub conv_1: ConvLayer,
    pub conv_2: ConvLayer,
    pub fc_1: FcLayer,
    pub fc_2: FcLayer,
    pub fc_3: FcLayer,
}

impl GeneratorParams {
    pub fn zeros() -> Self {
        Self {
            conv3d_1: ConvLayer::new(GEN_C3D, 1, TAPS_3D),
            conv3d_2: ConvLayer::new(GEN_C3D, GEN_C3D, TAPS_3D),
            conv2d_1: ConvLayer::new(GEN_C2D, GEN_C_FLAT, TAPS_2D),
            conv2d_2: ConvLayer::new(1, GEN_C2D, TAPS_2D),
        }
    }

    pub fn param_count() -> usize {
        let c1 = GEN_C3D * TAPS_3D + GEN_C3D;
        let c2 = GEN_C3D * GEN_C3D * TAPS_3D + GEN_C3D;
        let c3 = GEN_C2D * GEN_C_FLAT * TAPS_2D + GEN_C2D;
        let c4 = GEN_C2D * TAPS_2D + 1;
        c1 + c2 + c3 + c4
    }

    /// Flat view in declared field order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(Self::param_count());
        for layer in [&self.conv3d_1, &self.conv3d_2, &self.conv2d_1, &self.conv2d_2] {
            out.extend_from_slice(&layer.w);
            out.extend_from_slice(&layer.b);
        }
        out
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() != Self::param_count() {
            return Err(Error::DimMismatch(format!(
                "generator parameter blob has {} values, expected {}",
                flat.len(),
                Self::param_count()
            )));
        }
        let mut p = Self::zeros();
        let mut off = 0;
        for layer in [&mut p.conv3d_1, &mut p.conv3d_2, &mut p.conv2d_1, &mut p.conv2d_2] {
            let (wn, bn) = (layer.w.len(), layer.b.len());
            layer.w.copy_from_slice(&flat[off..off + wn]);
            off += wn;
            layer.b.copy_from_slice(&flat[off..off + bn]);
            off += bn;
        }
        Ok(p)
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }
}

impl DiscriminatorParams {
    pub fn zeros() -> Self {
        Self {
            conv_1: ConvLayer::new(DISC_CHANNELS, 1, TAPS_2D),
            conv_2: ConvLayer::new(DISC_CHANNELS, DISC_CHANNELS, TAPS_2D),
            fc_1: FcLayer::new(DISC_HIDDEN, DISC_FEATURES),
            fc_2: FcLayer::new(DISC_HIDDEN, DISC_HIDDEN),
            fc_3: FcLayer::new(1, DISC_HIDDEN),
        }
    }

    pub fn param_count() -> usize {
        let c1 = DISC_CHANNELS * TAPS_2D + DISC_CHANNELS;
        let c2 = DISC_CHANNELS * DISC_CHANNELS * TAPS_2D + DISC_CHANNELS;
        let f1 = DISC_HIDDEN * DISC_FEATURES + DISC_HIDDEN;
        let f2 = DISC_HIDDEN * DISC_HIDDEN + DISC_HIDDEN;
        let f3 = DISC_HIDDEN + 1;
        c1 + c2 + f1 + f2 + f3
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(Self::param_count());
        for layer in [&self.conv_1, &self.conv_2] {
            out.extend_from_slice(&layer.w);
            out.extend_from_slice(&layer.b);
        }
        for fc in [&self.fc_1, &self.fc_2, &self.fc_3] {
            out.extend_from_slice(&fc.w);
            out.extend_from_slice(&fc.b);
        }
        out
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() != Self::param_count() {
            return Err(Error::DimMismatch(format!(
                "discriminator parameter blob has {} values, expected {}",
                flat.len(),
                Self::param_count()
            )));
        }
        let mut p = Self::zeros();
        let mut off = 0;
        for layer in [&mut p.conv_1, &mut p.conv_2] {
            let (wn, bn) = (layer.w.len(), layer.b.len());
            layer.w.copy_from_slice(&flat[off..off + wn]);
            off += wn;
            layer.b.copy_from_slice(&flat[off..off + bn]);
            off += bn;
        }
        for fc in [&mut p.fc_1, &mut p.fc_2, &mut p.fc_3] {
            let (wn, bn) = (fc.w.len(), fc.b.len());
            fc.w.copy_from_slice(&flat[off..off + wn]);
            off += wn;
            fc.b.copy_from_slice(&flat[off..off + bn]);
            off += bn;
        }
        Ok(p)
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }
}

/// He-style fan-in initialization: weights `N(0, 2/fan_in)`, zero biases,
/// deterministic in the seed. The generator's weights are drawn before the
/// discriminator's, in declared field order.
pub fn init_params(seed: u64) -> (GeneratorParams, DiscriminatorParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |w: &mut [f64], fan_in: usize| {
        let std = math::sqrt(2.0 / fan_in as f64);
        for v in w.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = std * z;
        }
    };

    let mut gen = GeneratorParams::zeros();
    draw(&mut gen.conv3d_1.w, TAPS_3D);
    draw(&mut gen.conv3d_2.w, GEN_C3D * TAPS_3D);
    draw(&mut gen.conv2d_1.w, GEN_C_FLAT * TAPS_2D);
    draw(&mut gen.conv2d_2.w, GEN_C2D * TAPS_2D);

    let mut disc = DiscriminatorParams::zeros();
    draw(&mut disc.conv_1.w, TAPS_2D);
    draw(&mut disc.conv_2.w, DISC_CHANNELS * TAPS_2D);
    draw(&mut disc.fc_1.w, DISC_FEATURES);
    draw(&mut disc.fc_2.w, DISC_HIDDEN);
    draw(&mut disc.fc_3.w, DISC_HIDDEN);

    (gen, disc)
}
