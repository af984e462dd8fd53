//! Human-readable geometry config files (`key = value` lines).

use std::path::Path;

use anyhow::{Context, Result};
use cbct_core::ConeBeamGeometry;

use crate::formats::{kv_f64, kv_usize, parse_kv};

/// Canonical text form; also the input to the manifest's geometry hash.
pub fn geometry_to_text(g: &ConeBeamGeometry) -> String {
    format!(
        "dso_mm = {}\ndsd_mm = {}\ndet_rows = {}\ndet_cols = {}\ndet_pixel_mm = {}\n\
         vol_nx = {}\nvol_ny = {}\nvol_nz = {}\nvoxel_mm = {}\n",
        g.dso_mm, g.dsd_mm, g.det_rows, g.det_cols, g.det_pixel_mm, g.vol_nx, g.vol_ny, g.vol_nz,
        g.voxel_mm
    )
}

/// Parses and validates a geometry config.
pub fn geometry_from_text(text: &str) -> Result<ConeBeamGeometry> {
    let kv = parse_kv(text);
    Ok(ConeBeamGeometry::new(
        kv_f64(&kv, "dso_mm")?,
        kv_f64(&kv, "dsd_mm")?,
        kv_usize(&kv, "det_rows")?,
        kv_usize(&kv, "det_cols")?,
        kv_f64(&kv, "det_pixel_mm")?,
        kv_usize(&kv, "vol_nx")?,
        kv_usize(&kv, "vol_ny")?,
        kv_usize(&kv, "vol_nz")?,
        kv_f64(&kv, "voxel_mm")?,
    )?)
}

pub fn save_geometry(path: &Path, g: &ConeBeamGeometry) -> Result<()> {
    std::fs::write(path, geometry_to_text(g))
        .with_context(|| format!("writing {}", path.display()))
}

pub fn load_geometry(path: &Path) -> Result<ConeBeamGeometry> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    geometry_from_text(&text).with_context(|| format!("parsing {}", path.display()))
}

/// SHA-256 of the canonical geometry text, hex-encoded.
pub fn geometry_hash(g: &ConeBeamGeometry) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(geometry_to_text(g).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use cbct_core::geometry::GeometryPreset;

    #[test]
    fn desk_geometry_round_trips_through_text() {
        let g = ConeBeamGeometry::preset(GeometryPreset::Desk);
        let text = geometry_to_text(&g);
        let back = geometry_from_text(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(geometry_hash(&back), geometry_hash(&g));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let g = ConeBeamGeometry::preset(GeometryPreset::Desk);
        let text = geometry_to_text(&g).replace("det_pixel_mm = 3.125", "det_pixel_mm = 1.25");
        assert!(geometry_from_text(&text).is_err());
    }
}
