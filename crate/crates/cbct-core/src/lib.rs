//! Sparse-view cone-beam CT reconstruction.
//!
//! This crate implements a multi-stage reconstruction pipeline for cone-beam
//! CT with very few projection views:
//!
//! 1. an analytical FDK reconstruction ([`fdk`]) used as a fast baseline and
//!    as the initializer for
//! 2. an edge-preserving regularized iterative reconstruction ([`ep`]),
//!    whose output seeds
//! 3. a sequence of stages, each pairing a small 3D-to-2D destreaking CNN
//!    ([`nn`], trained with a combined masked-MSE and adversarial loss,
//!    [`training`]) with a conjugate-gradient data-consistency solve
//!    ([`dc`]). The stage loop lives in [`pipeline`].
//!
//! The forward projector and its exact adjoint ([`projector`]) share one
//! footprint computation, so `⟨Ax, y⟩ = ⟨x, Aᵀy⟩` holds to floating-point
//! accuracy — a requirement for the CG solves. Reconstruction quality is
//! scored with masked NMAE and NHFEN ([`metrics`]), and [`phantom`] provides
//! deterministic walnut-like test volumes plus sinogram simulation.
//!
//! The crate is `no_std`-compatible (requires `alloc`): disable default
//! features and enable `libm` for software float math. The default `std`
//! build enables `rayon`-based parallelism (`parallel` feature); results are
//! bitwise independent of the worker count.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(not(any(feature = "std", feature = "libm")))]
compile_error!("cbct-core requires either the `std` or the `libm` feature");

pub mod dc;
pub mod ep;
pub mod fdk;
pub mod fft;
pub mod geometry;
pub mod metrics;
pub mod nn;
pub mod patching;
pub mod phantom;
pub mod pipeline;
pub mod projector;
pub mod training;
pub mod types;

pub(crate) mod math;
pub(crate) mod parallel;

pub use types::{Error, Grid2, Image2, Mask2, Mask3, Result, Sinogram, Subvolume, Volume3D};
pub use geometry::{view_angles, ConeBeamGeometry, GeometryPreset, ViewSet};
