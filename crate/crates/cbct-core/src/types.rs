//! Core data types: volumes, sinograms, 2D slices, masks, and errors.
//!
//! Array layouts are fixed crate-wide:
//! * volumes are `x`-fastest: `index = x + nx*(y + ny*z)`, so a transverse
//!   slice is one contiguous chunk;
//! * sinograms are column-fastest with the view outermost:
//!   `index = col + cols*(row + rows*view)`, so each view's detector image
//!   is contiguous.
//!
//! Image data is stored in single precision; solvers accumulate in double
//! precision internally.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{ConeBeamGeometry, ViewSet};

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A geometry invariant failed; the message names the constraint.
    #[error("invalid geometry: {0}")]
    Geometry(String),
    /// Array shapes disagree with each other or with the geometry.
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    /// A parameter is outside its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A computation produced a non-finite value.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// A loss mask selected no pixels.
    #[error("empty mask: {0}")]
    EmptyMask(String),
}

pub type Result<T> = core::result::Result<T, Error>;

/// Scalar attenuation field on a regular cubic-voxel grid centered on the
/// isocenter. Values are attenuation per mm.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Cubic voxel pitch in mm.
    pub voxel_mm: f64,
    pub data: Vec<f32>,
}

impl Volume3D {
    pub fn zeros(nx: usize, ny: usize, nz: usize, voxel_mm: f64) -> Self {
        Self { nx, ny, nz, voxel_mm, data: vec![0.0; nx * ny * nz] }
    }

    pub fn from_data(nx: usize, ny: usize, nz: usize, voxel_mm: f64, data: Vec<f32>) -> Result<Self> {
        if data.len() != nx * ny * nz {
            return Err(Error::DimMismatch(alloc::format!(
                "volume payload has {} values, dims {}x{}x{} require {}",
                data.len(),
                nx,
                ny,
                nz,
                nx * ny * nz
            )));
        }
        Ok(Self { nx, ny, nz, voxel_mm, data })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.idx(x, y, z)]
    }

    /// Contiguous transverse slice at height `z`.
    #[inline]
    pub fn slice(&self, z: usize) -> &[f32] {
        let n = self.nx * self.ny;
        &self.data[z * n..(z + 1) * n]
    }

    #[inline]
    pub fn slice_mut(&mut self, z: usize) -> &mut [f32] {
        let n = self.nx * self.ny;
        &mut self.data[z * n..(z + 1) * n]
    }

    /// Checks that the grid matches the geometry's voxel grid.
    pub fn check_matches(&self, geom: &ConeBeamGeometry) -> Result<()> {
        if self.nx != geom.vol_nx || self.ny != geom.vol_ny || self.nz != geom.vol_nz {
            return Err(Error::DimMismatch(alloc::format!(
                "volume {}x{}x{} does not match geometry {}x{}x{}",
                self.nx,
                self.ny,
                self.nz,
                geom.vol_nx,
                geom.vol_ny,
                geom.vol_nz
            )));
        }
        Ok(())
    }
}

/// Stack of 2D projections, one per view angle. Values are line integrals of
/// attenuation (mm · attenuation/mm).
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub geometry: ConeBeamGeometry,
    pub views: ViewSet,
    pub data: Vec<f32>,
}

impl Sinogram {
    pub fn zeros(geometry: ConeBeamGeometry, views: ViewSet) -> Self {
        let n = views.len() * geometry.det_rows * geometry.det_cols;
        Self { geometry, views, data: vec![0.0; n] }
    }

    pub fn from_data(geometry: ConeBeamGeometry, views: ViewSet, data: Vec<f32>) -> Result<Self> {
        let n = views.len() * geometry.det_rows * geometry.det_cols;
        if data.len() != n {
            return Err(Error::DimMismatch(alloc::format!(
                "sinogram payload has {} values, {} views of {}x{} require {}",
                data.len(),
                views.len(),
                geometry.det_rows,
                geometry.det_cols,
                n
            )));
        }
        Ok(Self { geometry, views, data })
    }

    #[inline]
    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    #[inline]
    pub fn view_len(&self) -> usize {
        self.geometry.det_rows * self.geometry.det_cols
    }

    /// Contiguous detector image for one view.
    #[inline]
    pub fn view(&self, v: usize) -> &[f32] {
        let n = self.view_len();
        &self.data[v * n..(v + 1) * n]
    }

    #[inline]
    pub fn view_mut(&mut self, v: usize) -> &mut [f32] {
        let n = self.view_len();
        &mut self.data[v * n..(v + 1) * n]
    }
}

/// Single-precision 2D image (`x`-fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Image2 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Image2 {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimMismatch(alloc::format!(
                "image payload has {} values, dims {}x{} require {}",
                data.len(),
                width,
                height,
                width * height
            )));
        }
        Ok(Self { width, height, data })
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[x + self.width * y]
    }
}

/// Double-precision 2D grid used by the network forward/backward passes and
/// the loss functions, where finite-difference checks need full precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Grid2 {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    pub fn from_image(img: &Image2) -> Self {
        Self {
            width: img.width,
            height: img.height,
            data: img.data.iter().map(|&v| v as f64).collect(),
        }
    }

    pub fn to_image(&self) -> Image2 {
        Image2 {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v as f32).collect(),
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[x + self.width * y]
    }
}

/// Binary 2D mask aligned to a slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask2 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask2 {
    pub fn full(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![true; width * height] }
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&m| m).count()
    }
}

/// Binary 3D mask with the same layout as [`Volume3D`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mask3 {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub data: Vec<bool>,
}

impl Mask3 {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Self { nx, ny, nz, data: vec![false; nx * ny * nz] }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&m| m).count()
    }

    /// Restriction of the mask to one transverse slice.
    pub fn slice(&self, z: usize) -> Mask2 {
        let n = self.nx * self.ny;
        Mask2 { width: self.nx, height: self.ny, data: self.data[z * n..(z + 1) * n].to_vec() }
    }
}

/// Thin 3D patch of a parent volume, with its center slice index recorded.
/// Layout is `[z][y][x]` with `x` fastest, matching `Volume3D` slices.
#[derive(Debug, Clone, PartialEq)]
pub struct Subvolume {
    pub px: usize,
    pub py: usize,
    pub pz: usize,
    /// Slice index in the parent volume of this patch's central slice.
    pub z_center: usize,
    pub data: Vec<f32>,
}

impl Subvolume {
    #[inline]
    pub fn slice(&self, local_z: usize) -> &[f32] {
        let n = self.px * self.py;
        &self.data[local_z * n..(local_z + 1) * n]
    }
}
