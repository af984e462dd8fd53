//! The system operator `A` (forward projection) and its exact adjoint `Aᵀ`.
//!
//! Voxel-driven separable-footprint model: each voxel projects to a
//! rectangle on the flat detector (the voxel width magnified to the voxel's
//! depth), and its amplitude — the approximate ray length through the voxel,
//! `voxel / max|ray direction component|` — is distributed over the covered
//! detector pixels by overlap area. Adjacent same-depth voxels produce
//! footprints that exactly tile the detector, so line integrals through
//! extended objects are reproduced without gaps or double counting.
//!
//! Forward and adjoint share one footprint computation ([`ColumnSplat`]):
//! the in-plane part is hoisted per voxel column (everything in a column
//! shares its detector column range), and the adjoint gathers with
//! bitwise-identical weights, which makes `⟨Ax, y⟩ = ⟨x, Aᵀy⟩` hold to
//! roundoff — the property the conjugate gradient solvers rely on.
//!
//! Storage is single precision; per-pixel and per-voxel accumulation is
//! double precision. Per-view (forward) and per-column-block (adjoint) work
//! is parallelizable with disjoint outputs, so results do not depend on the
//! worker count.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{ConeBeamGeometry, ViewSet};
use crate::math;
use crate::parallel;
use crate::types::{Result, Sinogram, Volume3D};

/// Precomputed per-view quantities.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ViewFrame {
    pub cos: f64,
    pub sin: f64,
    /// Source position in world coordinates.
    pub sx: f64,
    pub sy: f64,
}

impl ViewFrame {
    pub fn new(geom: &ConeBeamGeometry, angle: f64) -> Self {
        let (c, s) = (math::cos(angle), math::sin(angle));
        Self { cos: c, sin: s, sx: geom.dso_mm * c, sy: geom.dso_mm * s }
    }
}

/// Footprint spans stay small: the geometry validation bounds the
/// magnified voxel width by a few detector pixels.
const MAX_SPAN: usize = 16;

/// The z-independent part of one (view, voxel column) footprint: detector
/// column coverage, magnification, and the in-plane ray components.
pub(crate) struct ColumnSplat {
    mag: f64,
    half: f64,
    dxy2: f64,
    max_xy: f64,
    n_cols: usize,
    col_pix: [usize; MAX_SPAN],
    col_w: [f64; MAX_SPAN],
}

impl ColumnSplat {
    /// Returns `None` when the column misses the detector entirely.
    #[inline]
    pub fn new(geom: &ConeBeamGeometry, frame: &ViewFrame, wx: f64, wy: f64) -> Option<Self> {
        let p_par = wx * frame.cos + wy * frame.sin;
        let p_tan = -wx * frame.sin + wy * frame.cos;
        let dist = geom.dso_mm - p_par;
        if dist <= geom.voxel_mm {
            return None; // at or behind the source: outside any sane setup
        }
        let mag = geom.dsd_mm / dist;
        let u = p_tan * mag;
        let half = 0.5 * geom.voxel_mm * mag;

        let tau = geom.det_pixel_mm;
        let inv_tau = 1.0 / tau;
        let half_cols = geom.det_cols as f64 / 2.0;

        // Pixel `c` spans u ∈ [(c - cols/2)·τ, (c + 1 - cols/2)·τ).
        let c_lo = math::ifloor((u - half) * inv_tau + half_cols);
        let c_hi = math::ifloor((u + half) * inv_tau + half_cols);
        if c_hi < 0 || c_lo >= geom.det_cols as isize {
            return None;
        }
        let c_lo = c_lo.max(0) as usize;
        let c_hi = c_hi.min(geom.det_cols as isize - 1) as usize;
        debug_assert!(c_hi - c_lo < MAX_SPAN, "footprint spans too many detector columns");

        let mut n_cols = 0usize;
        let mut col_pix = [0usize; MAX_SPAN];
        let mut col_w = [0.0f64; MAX_SPAN];
        for c in c_lo..=c_hi.min(c_lo + MAX_SPAN - 1) {
            let col_left = (c as f64 - half_cols) * tau;
            let ov_u = (u + half).min(col_left + tau) - (u - half).max(col_left);
            if ov_u <= 0.0 {
                continue;
            }
            col_pix[n_cols] = c;
            col_w[n_cols] = ov_u * inv_tau;
            n_cols += 1;
        }
        if n_cols == 0 {
            return None;
        }

        let dx = wx - frame.sx;
        let dy = wy - frame.sy;
        Some(Self {
            mag,
            half,
            dxy2: dx * dx + dy * dy,
            max_xy: dx.abs().max(dy.abs()),
            n_cols,
            col_pix,
            col_w,
        })
    }

    /// Calls `visit(pixel_index, weight)` for the voxel at height `wz`.
    #[inline]
    pub fn visit_z<F: FnMut(usize, f64)>(&self, geom: &ConeBeamGeometry, wz: f64, visit: &mut F) {
        let v = wz * self.mag;
        let norm = math::sqrt(self.dxy2 + wz * wz);
        let max_comp = self.max_xy.max(wz.abs());
        if max_comp == 0.0 {
            return;
        }
        let amp = geom.voxel_mm * norm / max_comp;

        let tau = geom.det_pixel_mm;
        let inv_tau = 1.0 / tau;
        let half_rows = geom.det_rows as f64 / 2.0;
        let r_lo = math::ifloor((v - self.half) * inv_tau + half_rows);
        let r_hi = math::ifloor((v + self.half) * inv_tau + half_rows);
        if r_hi < 0 || r_lo >= geom.det_rows as isize {
            return;
        }
        let r_lo = r_lo.max(0) as usize;
        let r_hi = r_hi.min(geom.det_rows as isize - 1) as usize;

        for r in r_lo..=r_hi {
            let row_left = (r as f64 - half_rows) * tau;
            let ov_v = (v + self.half).min(row_left + tau) - (v - self.half).max(row_left);
            if ov_v <= 0.0 {
                continue;
            }
            let row_amp = amp * (ov_v * inv_tau);
            let base = r * geom.det_cols;
            for k in 0..self.n_cols {
                visit(base + self.col_pix[k], row_amp * self.col_w[k]);
            }
        }
    }
}

/// Volume reordered so each (y, x) column is contiguous in z:
/// `index = (iy·nx + ix)·nz + iz`.
fn to_z_columns(input: &[f64], nx: usize, ny: usize, nz: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; input.len()];
    for iy in 0..ny {
        for ix in 0..nx {
            let col = (iy * nx + ix) * nz;
            let mut src = ix + nx * iy;
            for iz in 0..nz {
                out[col + iz] = input[src];
                src += nx * ny;
            }
        }
    }
    out
}

/// Voxel-center world coordinates along each axis.
pub(crate) fn axis_coords(geom: &ConeBeamGeometry) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let coords = |n: usize| -> Vec<f64> {
        (0..n).map(|i| (i as f64 - (n as f64 - 1.0) / 2.0) * geom.voxel_mm).collect()
    };
    (coords(geom.vol_nx), coords(geom.vol_ny), coords(geom.vol_nz))
}

/// Forward projection of an f64 volume buffer into a concatenated
/// per-view f64 detector buffer. The full-precision core behind
/// [`forward_project`], also used directly by the iterative solvers.
pub(crate) fn forward_f64(input: &[f64], geom: &ConeBeamGeometry, views: &ViewSet) -> Vec<f64> {
    debug_assert_eq!(input.len(), geom.vol_nx * geom.vol_ny * geom.vol_nz);
    let (nx, ny, nz) = (geom.vol_nx, geom.vol_ny, geom.vol_nz);
    let (xs, ys, zs) = axis_coords(geom);
    let det_len = geom.det_rows * geom.det_cols;
    let columns = to_z_columns(input, nx, ny, nz);

    let buffers = parallel::map_indexed(views.len(), |vi| {
        let frame = ViewFrame::new(geom, views.angles()[vi]);
        let mut det = vec![0.0f64; det_len];
        for (iy, &wy) in ys.iter().enumerate() {
            for (ix, &wx) in xs.iter().enumerate() {
                let Some(splat) = ColumnSplat::new(geom, &frame, wx, wy) else {
                    continue;
                };
                let col = &columns[(iy * nx + ix) * nz..(iy * nx + ix + 1) * nz];
                for (iz, &val) in col.iter().enumerate() {
                    if val == 0.0 {
                        continue;
                    }
                    splat.visit_z(geom, zs[iz], &mut |pix, w| {
                        det[pix] += w * val;
                    });
                }
            }
        }
        det
    });

    let mut out = Vec::with_capacity(views.len() * det_len);
    for det in buffers {
        out.extend_from_slice(&det);
    }
    out
}

/// Adjoint projection of a concatenated per-view f64 detector buffer into
/// an f64 volume buffer; weights are identical to [`forward_f64`].
pub(crate) fn backproject_f64(sino: &[f64], geom: &ConeBeamGeometry, views: &ViewSet) -> Vec<f64> {
    let det_len = geom.det_rows * geom.det_cols;
    debug_assert_eq!(sino.len(), views.len() * det_len);
    let (nx, ny, nz) = (geom.vol_nx, geom.vol_ny, geom.vol_nz);
    let (xs, ys, zs) = axis_coords(geom);
    let frames: Vec<ViewFrame> =
        views.angles().iter().map(|&a| ViewFrame::new(geom, a)).collect();

    // Gather per (y, x) column with z innermost, then restore x-fastest
    // order. Column blocks are disjoint, so parallel order cannot matter.
    let mut columns = vec![0.0f64; nx * ny * nz];
    const COL_BLOCK: usize = 32;
    parallel::for_each_chunk_mut(&mut columns, COL_BLOCK * nz, |block, chunk| {
        for (k, col) in chunk.chunks_mut(nz).enumerate() {
            let flat = block * COL_BLOCK + k;
            let (iy, ix) = (flat / nx, flat % nx);
            let (wx, wy) = (xs[ix], ys[iy]);
            for (vi, frame) in frames.iter().enumerate() {
                let Some(splat) = ColumnSplat::new(geom, frame, wx, wy) else {
                    continue;
                };
                let det = &sino[vi * det_len..(vi + 1) * det_len];
                for (iz, out) in col.iter_mut().enumerate() {
                    let mut acc = 0.0f64;
                    splat.visit_z(geom, zs[iz], &mut |pix, w| {
                        acc += w * det[pix];
                    });
                    *out += acc;
                }
            }
        }
    });

    let mut out = vec![0.0f64; nx * ny * nz];
    for iy in 0..ny {
        for ix in 0..nx {
            let col = (iy * nx + ix) * nz;
            let mut dst = ix + nx * iy;
            for iz in 0..nz {
                out[dst] = columns[col + iz];
                dst += nx * ny;
            }
        }
    }
    out
}

pub(crate) fn lift_f32(data: &[f32]) -> Vec<f64> {
    data.iter().map(|&v| v as f64).collect()
}

/// Forward projection `y = A x`.
pub fn forward_project(volume: &Volume3D, geom: &ConeBeamGeometry, views: &ViewSet) -> Result<Sinogram> {
    volume.check_matches(geom)?;
    let data = forward_f64(&lift_f32(&volume.data), geom, views);
    let mut sino = Sinogram::zeros(geom.clone(), views.clone());
    for (dst, src) in sino.data.iter_mut().zip(data) {
        *dst = src as f32;
    }
    Ok(sino)
}

/// Adjoint projection `x = Aᵀ y`, the exact transpose of [`forward_project`].
pub fn back_project(sino: &Sinogram, geom: &ConeBeamGeometry, views: &ViewSet) -> Result<Volume3D> {
    check_sino_matches(sino, geom, views)?;
    let data = backproject_f64(&lift_f32(&sino.data), geom, views);
    let mut volume = Volume3D::zeros(geom.vol_nx, geom.vol_ny, geom.vol_nz, geom.voxel_mm);
    for (dst, src) in volume.data.iter_mut().zip(data) {
        *dst = src as f32;
    }
    Ok(volume)
}

pub(crate) fn check_sino_matches(sino: &Sinogram, geom: &ConeBeamGeometry, views: &ViewSet) -> Result<()> {
    if sino.geometry != *geom
        || sino.views.len() != views.len()
        || sino.data.len() != views.len() * geom.det_rows * geom.det_cols
    {
        return Err(crate::types::Error::DimMismatch(alloc::format!(
            "sinogram ({} views, {} values) does not match geometry/views ({} views of {}x{})",
            sino.n_views(),
            sino.data.len(),
            views.len(),
            geom.det_rows,
            geom.det_cols
        )));
    }
    Ok(())
}

/// Double-precision inner product of two f32 slices.
pub fn dot_f32(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}
