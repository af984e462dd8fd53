//! Rotation and scale robustness sweeps over a trained pipeline.
//!
//! Rotation: shifting every acquired view angle by a fixed offset is
//! equivalent to rotating the test object relative to its training
//! orientation, so the sweep simulates measurements at shifted angle sets
//! and reconstructs each with the unmodified checkpoints. Scale: the test
//! object is resampled about the isocenter before simulation; scales whose
//! support would leave the grid are skipped with a warning.

use anyhow::Result;
use cbct_core::geometry::view_angles;
use cbct_core::metrics::{make_mask, nhfen, nmae};
use cbct_core::phantom::{rescale_volume, simulate_sinogram};
use cbct_core::pipeline::{reconstruct, PipelineConfig, StageCheckpoint};
use cbct_core::{ConeBeamGeometry, Volume3D};

/// One sweep entry: the varied parameter and the resulting quality.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub value: f64,
    pub nmae: f64,
    pub nhfen: f64,
}

/// Reconstructs `gt`'s noiseless measurements at each view-angle offset
/// (degrees) and scores against `gt`.
pub fn rotation_sweep(
    gt: &Volume3D,
    geom: &ConeBeamGeometry,
    checkpoints: &[StageCheckpoint],
    cfg: &PipelineConfig,
    n_views: usize,
    offsets_deg: &[f64],
) -> Result<Vec<SweepPoint>> {
    let mask = make_mask(gt, cfg.mask_dilation)?;
    let mut points = Vec::with_capacity(offsets_deg.len());
    for &offset in offsets_deg {
        let views = view_angles(n_views, offset)?;
        let y = simulate_sinogram(gt, geom, &views, 0, None)?;
        let out = reconstruct(&y, checkpoints, cfg, false)?;
        points.push(SweepPoint {
            value: offset,
            nmae: nmae(gt, &out.volume, &mask)?,
            nhfen: nhfen(gt, &out.volume, &mask)?,
        });
    }
    Ok(points)
}

/// Rescales `gt` by each factor, reconstructs its noiseless measurements,
/// and scores against the rescaled object. Returns the sweep plus the list
/// of skipped scales (support exceeded the grid).
pub fn scale_sweep(
    gt: &Volume3D,
    geom: &ConeBeamGeometry,
    checkpoints: &[StageCheckpoint],
    cfg: &PipelineConfig,
    n_views: usize,
    scales: &[f64],
) -> Result<(Vec<SweepPoint>, Vec<f64>)> {
    let views = view_angles(n_views, 0.0)?;
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for &scale in scales {
        let scaled = match rescale_volume(gt, scale) {
            Ok(v) => v,
            Err(_) => {
                skipped.push(scale);
                continue;
            }
        };
        let mask = make_mask(&scaled, cfg.mask_dilation)?;
        let y = simulate_sinogram(&scaled, geom, &views, 0, None)?;
        let out = reconstruct(&y, checkpoints, cfg, false)?;
        points.push(SweepPoint {
            value: scale,
            nmae: nmae(&scaled, &out.volume, &mask)?,
            nhfen: nhfen(&scaled, &out.volume, &mask)?,
        });
    }
    Ok((points, skipped))
}
