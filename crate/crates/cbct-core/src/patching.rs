//! Subvolume extraction, central-slice extraction, and slice aggregation.
//!
//! The destreaking network consumes thin 3D patches spanning (nearly) the
//! full slice extent and emits only each patch's central 2D slice, so
//! aggregation is exact: every interior slice is produced by exactly one
//! patch center and copied through bitwise, and slices near the volume ends
//! that have no valid patch center are set to zero.
//!
//! Valid centers are `z ∈ [depth/2, nz−1−depth/2]`; for even depth the
//! window covers `[z−depth/2, z+depth/2−1]` and the "central" slice is the
//! one at local index `depth/2`.

use alloc::format;
use alloc::vec::Vec;

use crate::types::{Error, Image2, Result, Subvolume, Volume3D};

/// Inclusive range of valid patch center indices for a volume of `nz`
/// slices and the given window depth.
pub fn valid_center_range(nz: usize, depth: usize) -> Result<(usize, usize)> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    if depth > nz {
        return Err(Error::InvalidArgument(format!("depth {depth} exceeds volume nz {nz}")));
    }
    let margin = depth / 2;
    if 2 * margin >= nz {
        return Err(Error::InvalidArgument(format!(
            "volume of {nz} slices leaves no valid centers at depth {depth}"
        )));
    }
    Ok((margin, nz - 1 - margin))
}

/// Extracts one subvolume per valid z center (stride 1), spatially cropped
/// to a centered `spatial_crop × spatial_crop` region.
pub fn extract_subvolumes(
    volume: &Volume3D,
    depth: usize,
    spatial_crop: usize,
) -> Result<Vec<Subvolume>> {
    if spatial_crop == 0 || spatial_crop > volume.nx.min(volume.ny) {
        return Err(Error::InvalidArgument(format!(
            "spatial crop {spatial_crop} must be in [1, {}]",
            volume.nx.min(volume.ny)
        )));
    }
    let (lo, hi) = valid_center_range(volume.nz, depth)?;
    let x0 = (volume.nx - spatial_crop) / 2;
    let y0 = (volume.ny - spatial_crop) / 2;

    let mut subs = Vec::with_capacity(hi - lo + 1);
    for zc in lo..=hi {
        let z0 = zc - depth / 2;
        let mut data = Vec::with_capacity(spatial_crop * spatial_crop * depth);
        for dz in 0..depth {
            let slab = volume.slice(z0 + dz);
            for yy in 0..spatial_crop {
                let row = (y0 + yy) * volume.nx + x0;
                data.extend_from_slice(&slab[row..row + spatial_crop]);
            }
        }
        subs.push(Subvolume { px: spatial_crop, py: spatial_crop, pz: depth, z_center: zc, data });
    }
    Ok(subs)
}

/// The subvolume's central slice (local index `depth/2`), which is the
/// parent slice at `z_center`.
pub fn central_slice(sub: &Subvolume) -> Image2 {
    let local = sub.pz / 2;
    Image2 { width: sub.px, height: sub.py, data: sub.slice(local).to_vec() }
}

/// Assembles a volume from per-center slices. Slices must cover exactly one
/// symmetric valid-center range `[m, nz−1−m]`; the `m` uncovered slices at
/// each end are zero. No averaging takes place: slice `z` of the output is
/// input slice `z`, bitwise.
pub fn aggregate_slices(slices: &[(usize, Image2)], nz: usize, voxel_mm: f64) -> Result<Volume3D> {
    if slices.is_empty() {
        return Err(Error::InvalidArgument("no slices to aggregate".into()));
    }
    let w = slices[0].1.width;
    let h = slices[0].1.height;
    let mut seen = alloc::vec![false; nz];
    for (z, img) in slices {
        if *z >= nz {
            return Err(Error::InvalidArgument(format!("slice index {z} out of range (nz={nz})")));
        }
        if seen[*z] {
            return Err(Error::InvalidArgument(format!("duplicate slice index {z}")));
        }
        if img.width != w || img.height != h {
            return Err(Error::DimMismatch(format!(
                "slice {z} is {}x{}, expected {w}x{h}",
                img.width, img.height
            )));
        }
        seen[*z] = true;
    }
    let lo = seen.iter().position(|&s| s).unwrap();
    let hi = seen.iter().rposition(|&s| s).unwrap();
    if seen[lo..=hi].iter().any(|&s| !s) {
        return Err(Error::InvalidArgument("missing slice index inside covered range".into()));
    }
    if hi != nz - 1 - lo {
        return Err(Error::InvalidArgument(format!(
            "covered range [{lo}, {hi}] is not a symmetric valid-center range for nz={nz}"
        )));
    }

    let mut vol = Volume3D::zeros(w, h, nz, voxel_mm);
    for (z, img) in slices {
        vol.slice_mut(*z).copy_from_slice(&img.data);
    }
    Ok(vol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_volume(nx: usize, ny: usize, nz: usize, seed: u64) -> Volume3D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = Volume3D::zeros(nx, ny, nz, 1.0);
        for x in v.data.iter_mut() {
            *x = rng.random::<f32>();
        }
        v
    }

    #[test]
    fn desk_scale_center_range_and_count() {
        assert_eq!(valid_center_range(64, 8).unwrap(), (4, 59));
        let vol = random_volume(16, 16, 64, 0);
        let subs = extract_subvolumes(&vol, 8, 16).unwrap();
        assert_eq!(subs.len(), 56);
        assert_eq!(subs[0].z_center, 4);
        assert_eq!(subs[55].z_center, 59);
    }

    #[test]
    fn depth_one_subvolume_is_the_slice_itself() {
        let vol = random_volume(8, 8, 5, 1);
        let subs = extract_subvolumes(&vol, 1, 8).unwrap();
        assert_eq!(subs.len(), 5);
        for (z, sub) in subs.iter().enumerate() {
            assert_eq!(sub.z_center, z);
            assert_eq!(sub.data, vol.slice(z));
            let central = central_slice(sub);
            assert_eq!(central.data, vol.slice(z));
        }
    }

    #[test]
    fn central_slice_uses_even_depth_convention() {
        // Depth 8: the central slice is the 5th of the window (local 4).
        let vol = random_volume(6, 6, 16, 2);
        let subs = extract_subvolumes(&vol, 8, 6).unwrap();
        for sub in &subs {
            assert_eq!(sub.pz, 8);
            let central = central_slice(sub);
            assert_eq!(central.data, vol.slice(sub.z_center));
            assert_eq!(central.data, sub.slice(4));
        }
    }

    #[test]
    fn constant_subvolume_has_constant_central_slice() {
        let mut vol = Volume3D::zeros(4, 4, 9, 1.0);
        for v in vol.data.iter_mut() {
            *v = 7.25;
        }
        let subs = extract_subvolumes(&vol, 3, 4).unwrap();
        let central = central_slice(&subs[0]);
        assert!(central.data.iter().all(|&v| v == 7.25));
    }

    #[test]
    fn depth_exceeding_nz_is_rejected() {
        let vol = random_volume(4, 4, 4, 3);
        assert!(extract_subvolumes(&vol, 5, 4).is_err());
    }

    #[test]
    fn round_trip_is_identity_with_zero_boundaries() {
        let vol = random_volume(12, 12, 64, 4);
        let subs = extract_subvolumes(&vol, 8, 12).unwrap();
        let slices: Vec<(usize, Image2)> =
            subs.iter().map(|s| (s.z_center, central_slice(s))).collect();
        let agg = aggregate_slices(&slices, 64, vol.voxel_mm).unwrap();

        for z in 0..64 {
            if (4..=59).contains(&z) {
                assert_eq!(agg.slice(z), vol.slice(z), "slice {z} not bitwise equal");
            } else {
                assert!(agg.slice(z).iter().all(|&v| v == 0.0), "slice {z} not zero");
            }
        }
    }

    #[test]
    fn aggregate_rejects_missing_and_duplicate_indices() {
        let img = Image2::zeros(4, 4);
        // Missing index inside the range.
        let slices: Vec<(usize, Image2)> =
            [2usize, 3, 5].iter().map(|&z| (z, img.clone())).collect();
        assert!(aggregate_slices(&slices, 8, 1.0).is_err());

        // Duplicate index.
        let dup = alloc::vec![(2usize, img.clone()), (2usize, img.clone())];
        assert!(aggregate_slices(&dup, 8, 1.0).is_err());

        // Asymmetric coverage.
        let asym: Vec<(usize, Image2)> = (1..=5).map(|z| (z, img.clone())).collect();
        assert!(aggregate_slices(&asym, 8, 1.0).is_err());

        // Symmetric range works.
        let ok: Vec<(usize, Image2)> = (2..=5).map(|z| (z, img.clone())).collect();
        assert!(aggregate_slices(&ok, 8, 1.0).is_ok());
    }

    #[test]
    fn aggregate_of_zero_slices_is_zero_volume() {
        let img = Image2::zeros(5, 5);
        let slices: Vec<(usize, Image2)> = (3..=6).map(|z| (z, img.clone())).collect();
        let vol = aggregate_slices(&slices, 10, 2.0).unwrap();
        assert!(vol.data.iter().all(|&v| v == 0.0));
        assert_eq!((vol.nx, vol.ny, vol.nz), (5, 5, 10));
    }
}
