//! Binary volume and sinogram files.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use cbct_core::{ConeBeamGeometry, Sinogram, ViewSet, Volume3D};

pub const VOLUME_MAGIC: &[u8; 8] = b"CBCTVOL\0";
pub const SINOGRAM_MAGIC: &[u8; 8] = b"CBCTSIN\0";
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CBCTCKP\0";
pub const FORMAT_VERSION: u32 = 1;

/// Writes one container: magic, version, text header, f32 payload.
pub fn write_container(path: &Path, magic: &[u8; 8], header: &str, payload: &[f32]) -> Result<()> {
    let mut bytes =
        Vec::with_capacity(16 + header.len() + payload.len() * 4);
    bytes.extend_from_slice(magic);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
    bytes.extend_from_slice(header.as_bytes());
    for v in payload {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Reads one container, checking magic and version.
pub fn read_container(path: &Path, magic: &[u8; 8]) -> Result<(BTreeMap<String, String>, Vec<f32>)> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .with_context(|| format!("opening {}", path.display()))?
        .read_to_end(&mut bytes)?;
    if bytes.len() < 16 {
        bail!("{}: file too short for the 16-byte header", path.display());
    }
    if &bytes[0..8] != magic {
        bail!(
            "{}: bad magic bytes {:?}, expected {:?}",
            path.display(),
            &bytes[0..8],
            magic
        );
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        bail!("{}: unknown format version {version}", path.display());
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if bytes.len() < 16 + hlen {
        bail!("{}: truncated text header", path.display());
    }
    let header = std::str::from_utf8(&bytes[16..16 + hlen])
        .with_context(|| format!("{}: header is not valid UTF-8", path.display()))?;
    let kv = parse_kv(header);

    let payload_bytes = &bytes[16 + hlen..];
    if payload_bytes.len() % 4 != 0 {
        bail!("{}: truncated payload ({} bytes)", path.display(), payload_bytes.len());
    }
    let payload = payload_bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((kv, payload))
}

pub fn parse_kv(text: &str) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    map
}

pub fn kv_f64(kv: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    kv.get(key)
        .with_context(|| format!("missing header field `{key}`"))?
        .parse::<f64>()
        .with_context(|| format!("header field `{key}` is not a number"))
}

pub fn kv_usize(kv: &BTreeMap<String, String>, key: &str) -> Result<usize> {
    kv.get(key)
        .with_context(|| format!("missing header field `{key}`"))?
        .parse::<usize>()
        .with_context(|| format!("header field `{key}` is not a count"))
}

pub fn kv_u64(kv: &BTreeMap<String, String>, key: &str) -> Result<u64> {
    kv.get(key)
        .with_context(|| format!("missing header field `{key}`"))?
        .parse::<u64>()
        .with_context(|| format!("header field `{key}` is not an integer"))
}

// ---- volumes ----

pub fn save_volume(path: &Path, vol: &Volume3D) -> Result<()> {
    let header = format!(
        "nx={}\nny={}\nnz={}\nvoxel_mm={}\nunits=attenuation_per_mm\n",
        vol.nx, vol.ny, vol.nz, vol.voxel_mm
    );
    write_container(path, VOLUME_MAGIC, &header, &vol.data)
}

pub fn load_volume(path: &Path) -> Result<Volume3D> {
    let (kv, payload) = read_container(path, VOLUME_MAGIC)?;
    let nx = kv_usize(&kv, "nx")?;
    let ny = kv_usize(&kv, "ny")?;
    let nz = kv_usize(&kv, "nz")?;
    let voxel = kv_f64(&kv, "voxel_mm")?;
    if payload.len() != nx * ny * nz {
        bail!(
            "{}: payload has {} values but dims {}x{}x{} require {}",
            path.display(),
            payload.len(),
            nx,
            ny,
            nz,
            nx * ny * nz
        );
    }
    Ok(Volume3D::from_data(nx, ny, nz, voxel, payload)?)
}

/// Imports a raw little-endian f32 volume with caller-supplied dimensions.
pub fn load_raw_volume(path: &Path, nx: usize, ny: usize, nz: usize, voxel_mm: f64) -> Result<Volume3D> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .with_context(|| format!("opening {}", path.display()))?
        .read_to_end(&mut bytes)?;
    if bytes.len() != nx * ny * nz * 4 {
        bail!(
            "{}: raw payload is {} bytes but dims {}x{}x{} require {}",
            path.display(),
            bytes.len(),
            nx,
            ny,
            nz,
            nx * ny * nz * 4
        );
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Volume3D::from_data(nx, ny, nz, voxel_mm, data)?)
}

// ---- sinograms ----

pub fn save_sinogram(path: &Path, sino: &Sinogram) -> Result<()> {
    let g = &sino.geometry;
    let angles: Vec<String> = sino.views.angles().iter().map(|a| format!("{a}")).collect();
    let header = format!(
        "n_views={}\ndet_rows={}\ndet_cols={}\ndet_pixel_mm={}\ndso_mm={}\ndsd_mm={}\n\
         vol_nx={}\nvol_ny={}\nvol_nz={}\nvoxel_mm={}\nunits=mm_attenuation\nangles_rad={}\n",
        sino.n_views(),
        g.det_rows,
        g.det_cols,
        g.det_pixel_mm,
        g.dso_mm,
        g.dsd_mm,
        g.vol_nx,
        g.vol_ny,
        g.vol_nz,
        g.voxel_mm,
        angles.join(",")
    );
    write_container(path, SINOGRAM_MAGIC, &header, &sino.data)
}

pub fn load_sinogram(path: &Path) -> Result<Sinogram> {
    let (kv, payload) = read_container(path, SINOGRAM_MAGIC)?;
    let geometry = ConeBeamGeometry {
        dso_mm: kv_f64(&kv, "dso_mm")?,
        dsd_mm: kv_f64(&kv, "dsd_mm")?,
        det_rows: kv_usize(&kv, "det_rows")?,
        det_cols: kv_usize(&kv, "det_cols")?,
        det_pixel_mm: kv_f64(&kv, "det_pixel_mm")?,
        vol_nx: kv_usize(&kv, "vol_nx")?,
        vol_ny: kv_usize(&kv, "vol_ny")?,
        vol_nz: kv_usize(&kv, "vol_nz")?,
        voxel_mm: kv_f64(&kv, "voxel_mm")?,
    };
    let n_views = kv_usize(&kv, "n_views")?;
    let angles: Vec<f64> = kv
        .get("angles_rad")
        .context("missing header field `angles_rad`")?
        .split(',')
        .map(|s| s.trim().parse::<f64>().context("bad angle value"))
        .collect::<Result<_>>()?;
    if angles.len() != n_views {
        bail!("{}: n_views={} but {} angles listed", path.display(), n_views, angles.len());
    }
    let views = ViewSet::from_angles(angles)?;
    Ok(Sinogram::from_data(geometry, views, payload)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cbct_core::geometry::{view_angles, GeometryPreset};
    use cbct_core::phantom::make_phantom;
    use cbct_core::projector::forward_project;

    #[test]
    fn volume_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.svol");
        let geom = ConeBeamGeometry::preset(GeometryPreset::Desk);
        let vol = make_phantom(3, &geom);
        save_volume(&path, &vol).unwrap();
        let back = load_volume(&path).unwrap();
        assert_eq!(back, vol);
    }

    #[test]
    fn sinogram_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.ssin");
        let geom = ConeBeamGeometry::new(159.2, 200.0, 12, 12, 6.7, 8, 8, 8, 7.5).unwrap();
        let views = view_angles(5, 7.5).unwrap();
        let vol = make_phantom(1, &geom);
        let sino = forward_project(&vol, &geom, &views).unwrap();
        save_sinogram(&path, &sino).unwrap();
        let back = load_sinogram(&path).unwrap();
        assert_eq!(back, sino);
    }

    #[test]
    fn corrupted_magic_is_named_in_the_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.svol");
        let geom = ConeBeamGeometry::preset(GeometryPreset::Desk);
        let vol = Volume3D::zeros(4, 4, 4, geom.voxel_mm);
        save_volume(&path, &vol).unwrap();

        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        let err = load_volume(&path).unwrap_err();
        assert!(format!("{err:#}").contains("magic"), "{err:#}");
    }

    #[test]
    fn unknown_version_and_truncation_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.svol");
        let vol = Volume3D::zeros(3, 3, 3, 1.0);
        save_volume(&path, &vol).unwrap();

        let mut bytes = fs::read(&path).unwrap();
        bytes[8] = 9; // version
        fs::write(&path, &bytes).unwrap();
        let err = load_volume(&path).unwrap_err();
        assert!(format!("{err:#}").contains("version"), "{err:#}");

        // Header dims no longer match the payload length.
        save_volume(&path, &vol).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 8);
        fs::write(&path, &bytes).unwrap();
        let err = load_volume(&path).unwrap_err();
        assert!(format!("{err:#}").contains("payload"), "{err:#}");
    }

    #[test]
    fn raw_import_checks_length() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw.f32");
        let data: Vec<u8> = (0..8 * 4).map(|i| i as u8).collect();
        fs::write(&path, &data).unwrap();
        assert!(load_raw_volume(&path, 2, 2, 2, 1.0).is_ok());
        assert!(load_raw_volume(&path, 2, 2, 3, 1.0).is_err());
    }
}
