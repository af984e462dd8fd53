//! Analytical FDK reconstruction.
//!
//! Standard flat-panel recipe: cosine-weight each projection, ramp-filter
//! each detector row, then voxel-driven backprojection with the FDK
//! distance weight and a `π/n_views` scale.
//!
//! The ramp filter is applied in the frequency domain after zero-padding
//! each row to at least twice its length. Its frequency response is the DFT
//! of the closed-form band-limited ramp kernel
//! `h[0] = 1/(4τ²)`, `h[n] = −1/(π²n²τ²)` for odd `n`, `0` otherwise —
//! the construction that keeps the discrete filter consistent with its
//! spatial-domain definition (an impulse filters to exactly `τ·h`). A Hann
//! window can be applied on top (the default for reconstruction).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::fft::{fft_in_place, fft_real, next_pow2, C64};
use crate::geometry::{ConeBeamGeometry, ViewSet};
use crate::math;
use crate::parallel;
use crate::projector::check_sino_matches;
use crate::types::{Error, Result, Sinogram, Volume3D};

/// Ramp filter apodization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RampFilter {
    /// Bare ramp (Ram-Lak).
    RamLak,
    /// Hann-apodized ramp; damps the noise-amplifying high band.
    Hann,
}

/// Closed-form band-limited ramp kernel, scaled by the sample pitch so that
/// circular convolution with it realizes `τ·(h ⊛ row)`, laid out circularly
/// over `n_pad` taps.
fn ramp_kernel(n_pad: usize, pitch_mm: f64) -> Vec<f64> {
    let mut h = vec![0.0f64; n_pad];
    let tau2 = pitch_mm * pitch_mm;
    for (i, v) in h.iter_mut().enumerate() {
        let k = i.min(n_pad - i); // |offset| in circular layout
        if k == 0 {
            *v = 0.25 / tau2;
        } else if k % 2 == 1 {
            *v = -1.0 / (core::f64::consts::PI * core::f64::consts::PI * (k * k) as f64 * tau2);
        }
    }
    for v in h.iter_mut() {
        *v *= pitch_mm;
    }
    h
}

/// Frequency response of the (possibly apodized) ramp filter on `n_pad`
/// points. Real-valued because the kernel is even.
fn ramp_response(n_pad: usize, pitch_mm: f64, filter: RampFilter) -> Vec<f64> {
    let spectrum = fft_real(&ramp_kernel(n_pad, pitch_mm), n_pad);
    let mut resp: Vec<f64> = spectrum.iter().map(|c| c.0).collect();
    if filter == RampFilter::Hann {
        let half = n_pad as f64 / 2.0;
        for (k, r) in resp.iter_mut().enumerate() {
            let f = k.min(n_pad - k) as f64 / half; // 0 at DC, 1 at Nyquist
            *r *= 0.5 * (1.0 + math::cos(core::f64::consts::PI * f));
        }
    }
    resp
}

fn filter_row_with(response: &[f64], row: &[f64]) -> Vec<f64> {
    let n_pad = response.len();
    let mut buf: Vec<C64> = vec![(0.0, 0.0); n_pad];
    for (dst, &src) in buf.iter_mut().zip(row) {
        dst.0 = src;
    }
    fft_in_place(&mut buf, false);
    for (v, &r) in buf.iter_mut().zip(response) {
        v.0 *= r;
        v.1 *= r;
    }
    fft_in_place(&mut buf, true);
    buf[..row.len()].iter().map(|c| c.0).collect()
}

/// Ramp-filters one detector row sampled at `pitch_mm`.
///
/// The row is zero-padded to the next power of two at or above twice its
/// length, so the circular convolution equals the linear one over the row.
pub fn ramp_filter_row(row: &[f64], filter: RampFilter, pitch_mm: f64) -> Result<Vec<f64>> {
    if row.len() < 2 {
        return Err(Error::InvalidArgument(String::from("row must have at least 2 samples")));
    }
    if !(pitch_mm > 0.0) {
        return Err(Error::InvalidArgument(String::from("pitch must be positive")));
    }
    let n_pad = next_pow2(row.len() * 2);
    Ok(filter_row_with(&ramp_response(n_pad, pitch_mm, filter), row))
}

/// FDK reconstruction of a cone-beam sinogram.
pub fn fdk_reconstruct(
    sino: &Sinogram,
    geom: &ConeBeamGeometry,
    views: &ViewSet,
    filter: RampFilter,
) -> Result<Volume3D> {
    check_sino_matches(sino, geom, views)?;

    let rows = geom.det_rows;
    let cols = geom.det_cols;
    let tau = geom.det_pixel_mm;
    let n_pad = next_pow2(cols * 2);
    let response = ramp_response(n_pad, tau, filter);

    // Cosine-weight and row-filter every view.
    let filtered: Vec<Vec<f64>> = parallel::map_indexed(views.len(), |vi| {
        let det = sino.view(vi);
        let mut out = vec![0.0f64; rows * cols];
        let mut row_buf = vec![0.0f64; cols];
        for r in 0..rows {
            let v = (r as f64 - (rows as f64 - 1.0) / 2.0) * tau;
            for c in 0..cols {
                let u = (c as f64 - (cols as f64 - 1.0) / 2.0) * tau;
                let w = geom.dsd_mm / math::sqrt(geom.dsd_mm * geom.dsd_mm + u * u + v * v);
                row_buf[c] = det[r * cols + c] as f64 * w;
            }
            out[r * cols..(r + 1) * cols].copy_from_slice(&filter_row_with(&response, &row_buf));
        }
        out
    });

    // Weighted backprojection with bilinear detector interpolation.
    let frames: Vec<(f64, f64)> =
        views.angles().iter().map(|&a| (math::cos(a), math::sin(a))).collect();
    let scale = core::f64::consts::PI / views.len() as f64 * geom.dsd_mm * geom.dso_mm;
    let inv_tau = 1.0 / tau;
    let mut vol = Volume3D::zeros(geom.vol_nx, geom.vol_ny, geom.vol_nz, geom.voxel_mm);
    let (xs, ys, zs) = crate::projector::axis_coords(geom);
    let slab = geom.vol_nx * geom.vol_ny;
    parallel::for_each_chunk_mut(&mut vol.data, slab, |z, out| {
        let wz = zs[z];
        let mut i = 0usize;
        for &wy in &ys {
            for &wx in &xs {
                let mut acc = 0.0f64;
                for (vi, &(c, s)) in frames.iter().enumerate() {
                    let p_par = wx * c + wy * s;
                    let p_tan = -wx * s + wy * c;
                    let dist = geom.dso_mm - p_par;
                    if dist <= geom.voxel_mm {
                        continue;
                    }
                    let mag = geom.dsd_mm / dist;
                    let fu = p_tan * mag * inv_tau + (cols as f64 - 1.0) / 2.0;
                    let fv = wz * mag * inv_tau + (rows as f64 - 1.0) / 2.0;
                    acc += bilinear(&filtered[vi], rows, cols, fu, fv) / (dist * dist);
                }
                out[i] = (acc * scale) as f32;
                i += 1;
            }
        }
    });
    Ok(vol)
}

/// Bilinear sample of a row-major image, zero outside the grid.
fn bilinear(img: &[f64], rows: usize, cols: usize, fx: f64, fy: f64) -> f64 {
    let x0 = math::ifloor(fx);
    let y0 = math::ifloor(fy);
    let ax = fx - x0 as f64;
    let ay = fy - y0 as f64;
    let mut acc = 0.0;
    for (dy, wy) in [(0isize, 1.0 - ay), (1, ay)] {
        let y = y0 + dy;
        if y < 0 || y >= rows as isize || wy == 0.0 {
            continue;
        }
        for (dx, wx) in [(0isize, 1.0 - ax), (1, ax)] {
            let x = x0 + dx;
            if x < 0 || x >= cols as isize || wx == 0.0 {
                continue;
            }
            acc += wy * wx * img[y as usize * cols + x as usize];
        }
    }
    acc
}
