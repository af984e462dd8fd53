//! Cone-beam acquisition geometry and view-angle sets.
//!
//! The scanner follows a circular orbit in the `z = 0` plane with a flat
//! detector orthogonal to the source–isocenter ray. World coordinates are
//! mm, centered on the isocenter; the source at angle `θ` sits at
//! `(dso·cosθ, dso·sinθ, 0)` and the detector center at distance
//! `dsd − dso` on the opposite side.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math;
use crate::types::{Error, Result};

/// Static description of a cone-beam scan: distances, detector grid and the
/// reconstruction voxel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeBeamGeometry {
    /// Source-to-isocenter distance (mm).
    pub dso_mm: f64,
    /// Source-to-detector distance (mm).
    pub dsd_mm: f64,
    pub det_rows: usize,
    pub det_cols: usize,
    /// Square detector pixel pitch (mm).
    pub det_pixel_mm: f64,
    pub vol_nx: usize,
    pub vol_ny: usize,
    pub vol_nz: usize,
    /// Cubic voxel pitch (mm).
    pub voxel_mm: f64,
}

/// Built-in geometries. `PaperFull` is the published full-scale setup
/// (501³ voxels, 150² detector); `Desk` is a proportionally scaled-down
/// version sized for workstation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryPreset {
    PaperFull,
    Desk,
}

impl ConeBeamGeometry {
    /// Validated construction from explicit fields.
    ///
    /// Beyond positivity and ordering constraints, requires the magnified
    /// volume footprint to fit on the detector:
    /// `vol_nx · voxel · (dsd/dso) ≤ det_cols · det_pixel`.
    pub fn new(
        dso_mm: f64,
        dsd_mm: f64,
        det_rows: usize,
        det_cols: usize,
        det_pixel_mm: f64,
        vol_nx: usize,
        vol_ny: usize,
        vol_nz: usize,
        voxel_mm: f64,
    ) -> Result<Self> {
        let geom = Self {
            dso_mm,
            dsd_mm,
            det_rows,
            det_cols,
            det_pixel_mm,
            vol_nx,
            vol_ny,
            vol_nz,
            voxel_mm,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Returns a curated preset.
    ///
    /// Presets carry published scanner constants verbatim, where the imaged
    /// object — not the padded voxel grid — defines the field of view, so
    /// the conservative grid-footprint validation in [`Self::new`] is not
    /// applied to them. `Desk` satisfies it regardless.
    pub fn preset(p: GeometryPreset) -> Self {
        match p {
            GeometryPreset::PaperFull => Self {
                dso_mm: 159.2,
                dsd_mm: 200.0,
                det_rows: 150,
                det_cols: 150,
                det_pixel_mm: 0.4,
                vol_nx: 501,
                vol_ny: 501,
                vol_nz: 501,
                voxel_mm: 0.12,
            },
            GeometryPreset::Desk => Self {
                dso_mm: 159.2,
                dsd_mm: 200.0,
                det_rows: 48,
                det_cols: 48,
                det_pixel_mm: 3.125,
                vol_nx: 64,
                vol_ny: 64,
                vol_nz: 64,
                voxel_mm: 0.9375,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let fail = |c: &str| Err(Error::Geometry(String::from(c)));
        if !(self.dso_mm > 0.0) {
            return fail("dso must be positive");
        }
        if !(self.dsd_mm > self.dso_mm) {
            return fail("dsd must exceed dso");
        }
        if self.det_rows < 1 || self.det_cols < 1 {
            return fail("detector must have at least one row and column");
        }
        if !(self.det_pixel_mm > 0.0) {
            return fail("detector pixel pitch must be positive");
        }
        if self.vol_nx < 1 || self.vol_ny < 1 || self.vol_nz < 1 {
            return fail("volume must have at least one voxel per axis");
        }
        if !(self.voxel_mm > 0.0) {
            return fail("voxel pitch must be positive");
        }
        let footprint = self.vol_nx as f64 * self.voxel_mm * self.magnification();
        let det_extent = self.det_cols as f64 * self.det_pixel_mm;
        if footprint > det_extent {
            return Err(Error::Geometry(format!(
                "magnified volume footprint ({footprint:.3} mm) exceeds detector extent ({det_extent:.3} mm)"
            )));
        }
        Ok(())
    }

    /// Magnification of the isocenter plane, `dsd / dso`.
    #[inline]
    pub fn magnification(&self) -> f64 {
        self.dsd_mm / self.dso_mm
    }

    /// Source position at view angle `angle` (radians).
    #[inline]
    pub fn source_position(&self, angle: f64) -> [f64; 3] {
        [self.dso_mm * math::cos(angle), self.dso_mm * math::sin(angle), 0.0]
    }

    /// World coordinate of a voxel center along one axis.
    #[inline]
    pub fn axis_coord(&self, i: usize, n: usize) -> f64 {
        (i as f64 - (n as f64 - 1.0) / 2.0) * self.voxel_mm
    }
}

/// Ordered set of view angles in radians, strictly increasing and spanning
/// less than a full turn from the first angle.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSet {
    angles: Vec<f64>,
}

impl ViewSet {
    pub fn from_angles(angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::InvalidArgument(String::from("view set must contain at least one angle")));
        }
        for w in angles.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidArgument(String::from("view angles must be strictly increasing")));
            }
        }
        let span = angles[angles.len() - 1] - angles[0];
        if span >= 2.0 * core::f64::consts::PI {
            return Err(Error::InvalidArgument(String::from(
                "view angles must lie within one full turn of the first angle",
            )));
        }
        Ok(Self { angles })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    #[inline]
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }
}

/// `n_views` angles equally spaced over 360°, starting at `offset_deg`.
pub fn view_angles(n_views: usize, offset_deg: f64) -> Result<ViewSet> {
    if n_views == 0 {
        return Err(Error::InvalidArgument(String::from("n_views must be at least 1")));
    }
    let step = 360.0 / n_views as f64;
    let angles = (0..n_views)
        .map(|i| (offset_deg + i as f64 * step).to_radians())
        .collect();
    ViewSet::from_angles(angles)
}
