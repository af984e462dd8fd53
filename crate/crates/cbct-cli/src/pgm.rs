//! Portable graymap export of volume slices.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use cbct_core::Volume3D;

/// Writes a binary PGM (P5), mapping `[0, max]` to `[0, 255]`.
pub fn save_pgm(path: &Path, width: usize, height: usize, data: &[f32], max: f32) -> Result<()> {
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend(data.iter().map(|&v| (v * scale).clamp(0.0, 255.0) as u8));
    let mut f =
        std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Exports the central transverse, coronal and sagittal slices, normalized
/// by the volume maximum.
pub fn export_central_slices(dir: &Path, vol: &Volume3D) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let max = vol.data.iter().fold(0.0f32, |m, &v| m.max(v));

    let (nx, ny, nz) = (vol.nx, vol.ny, vol.nz);
    let mut written = Vec::new();

    // Transverse: z fixed.
    let z = nz / 2;
    let path = dir.join(format!("transverse_z{z}.pgm"));
    save_pgm(&path, nx, ny, vol.slice(z), max)?;
    written.push(path);

    // Coronal: y fixed.
    let y = ny / 2;
    let mut coronal = vec![0.0f32; nx * nz];
    for z in 0..nz {
        for x in 0..nx {
            coronal[z * nx + x] = vol.at(x, y, z);
        }
    }
    let path = dir.join(format!("coronal_y{y}.pgm"));
    save_pgm(&path, nx, nz, &coronal, max)?;
    written.push(path);

    // Sagittal: x fixed.
    let x = nx / 2;
    let mut sagittal = vec![0.0f32; ny * nz];
    for z in 0..nz {
        for yy in 0..ny {
            sagittal[z * ny + yy] = vol.at(x, yy, z);
        }
    }
    let path = dir.join(format!("sagittal_x{x}.pgm"));
    save_pgm(&path, ny, nz, &sagittal, max)?;
    written.push(path);

    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_has_correct_header_and_size() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        let data = vec![0.0f32, 0.5, 1.0, 0.25];
        save_pgm(&path, 2, 2, &data, 1.0).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5\n2 2\n255\n"));
        assert_eq!(bytes.len(), b"P5\n2 2\n255\n".len() + 4);
        assert_eq!(bytes[bytes.len() - 4..], [0, 127, 255, 63]);
    }

    #[test]
    fn central_slices_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut vol = Volume3D::zeros(6, 5, 4, 1.0);
        vol.data[10] = 0.04;
        let files = export_central_slices(dir.path(), &vol).unwrap();
        assert_eq!(files.len(), 3);
        for f in files {
            assert!(f.exists());
        }
    }
}
