//! Image-quality metrics: masked NMAE and NHFEN.
//!
//! Both metrics are evaluated inside a binary region-of-interest mask built
//! from the ground-truth volume (histogram threshold plus dilation), so
//! empty space around the object does not dilute the score.
//!
//! * NMAE: `‖M⊙(gt − x)‖₁ / ‖M⊙gt‖₁` over the whole volume.
//! * NHFEN: per transverse slice, the L2 distance between
//!   Laplacian-of-Gaussian filtered masked slices, normalized by the
//!   filtered masked ground-truth slice, averaged over slices with
//!   non-negligible denominator.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::parallel;
use crate::types::{Error, Grid2, Mask3, Result, Volume3D};

/// Otsu threshold over a 256-bin histogram. Returns the threshold value;
/// voxels strictly above it belong to the object.
fn otsu_threshold(data: &[f32], lo: f32, hi: f32) -> f64 {
    const BINS: usize = 256;
    let mut hist = [0u64; BINS];
    let scale = (BINS as f64 - 1.0) / (hi - lo) as f64;
    for &v in data {
        let b = (((v - lo) as f64) * scale) as usize;
        hist[b.min(BINS - 1)] += 1;
    }
    let total: u64 = hist.iter().sum();
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();

    let mut best_t = 0usize;
    let mut best_var = -1.0f64;
    let mut w0 = 0u64;
    let mut sum0 = 0.0f64;
    for t in 0..BINS - 1 {
        w0 += hist[t];
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let m0 = sum0 / w0 as f64;
        let m1 = (sum_all - sum0) / w1 as f64;
        let var = w0 as f64 * w1 as f64 * (m0 - m1) * (m0 - m1);
        if var > best_var {
            best_var = var;
            best_t = t;
        }
    }
    // Threshold at the upper edge of the chosen bin.
    lo as f64 + (best_t as f64 + 1.0) / scale * 1.0 - 0.5 / scale
}

/// Object mask: Otsu histogram threshold on the ground truth, then
/// morphological dilation by an L1 ball of `dilation_radius` voxels
/// (radius 1 turns a single voxel into its 7-voxel 6-connected ball).
pub fn make_mask(gt: &Volume3D, dilation_radius: usize) -> Result<Mask3> {
    let mut lo = f32::INFINITY;
    let mut hi = f32::NEG_INFINITY;
    for &v in &gt.data {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(hi > lo) {
        return Err(Error::InvalidArgument("cannot threshold a constant volume".into()));
    }
    let thresh = otsu_threshold(&gt.data, lo, hi);

    let mut mask = Mask3::new(gt.nx, gt.ny, gt.nz);
    for (m, &v) in mask.data.iter_mut().zip(&gt.data) {
        *m = (v as f64) > thresh;
    }
    for _ in 0..dilation_radius {
        dilate6_once(&mut mask);
    }
    Ok(mask)
}

fn dilate6_once(mask: &mut Mask3) {
    let (nx, ny, nz) = (mask.nx, mask.ny, mask.nz);
    let prev = mask.data.clone();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = x + nx * (y + ny * z);
                if prev[i] {
                    continue;
                }
                let hit = (x > 0 && prev[i - 1])
                    || (x + 1 < nx && prev[i + 1])
                    || (y > 0 && prev[i - nx])
                    || (y + 1 < ny && prev[i + nx])
                    || (z > 0 && prev[i - nx * ny])
                    || (z + 1 < nz && prev[i + nx * ny]);
                mask.data[i] = hit;
            }
        }
    }
}

/// Per-slice NMAE; `None` where the masked ground-truth slice has zero L1
/// norm.
pub fn nmae_per_slice(gt: &Volume3D, x: &Volume3D, mask: &Mask3) -> Result<Vec<Option<f64>>> {
    if gt.data.len() != x.data.len() || gt.data.len() != mask.data.len() {
        return Err(Error::DimMismatch("nmae inputs must share dimensions".into()));
    }
    let n = gt.nx * gt.ny;
    let mut out = Vec::with_capacity(gt.nz);
    for z in 0..gt.nz {
        let gs = gt.slice(z);
        let xs = x.slice(z);
        let ms = &mask.data[z * n..(z + 1) * n];
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..n {
            if ms[i] {
                num += (gs[i] as f64 - xs[i] as f64).abs();
                den += (gs[i] as f64).abs();
            }
        }
        out.push(if den > 0.0 { Some(num / den) } else { None });
    }
    Ok(out)
}

/// Normalized mean absolute error inside the mask.
pub fn nmae(gt: &Volume3D, x: &Volume3D, mask: &Mask3) -> Result<f64> {
    if gt.data.len() != x.data.len() || gt.data.len() != mask.data.len() {
        return Err(Error::DimMismatch(format!(
            "nmae inputs disagree: gt {}, recon {}, mask {}",
            gt.data.len(),
            x.data.len(),
            mask.data.len()
        )));
    }
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for i in 0..gt.data.len() {
        if mask.data[i] {
            num += (gt.data[i] as f64 - x.data[i] as f64).abs();
            den += (gt.data[i] as f64).abs();
        }
    }
    if den == 0.0 {
        return Err(Error::InvalidArgument("masked ground truth has zero L1 norm".into()));
    }
    Ok(num / den)
}

/// Sampled, σ²-normalized Laplacian-of-Gaussian kernel on an odd
/// `size × size` grid, mean-subtracted so its entries sum to zero.
pub fn log_kernel(size: usize, sigma: f64) -> Result<Grid2> {
    if size < 3 || size % 2 == 0 {
        return Err(Error::InvalidArgument(format!("kernel size must be odd and ≥ 3, got {size}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument("sigma must be positive".into()));
    }
    let half = (size / 2) as isize;
    let s2 = sigma * sigma;
    let norm = 1.0 / (2.0 * core::f64::consts::PI * s2);
    let mut data = vec![0.0f64; size * size];
    for dy in -half..=half {
        for dx in -half..=half {
            let r2 = (dx * dx + dy * dy) as f64;
            let g = norm * math::exp(-r2 / (2.0 * s2));
            data[(dx + half) as usize + size * (dy + half) as usize] = (r2 - 2.0 * s2) / s2 * g;
        }
    }
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    for v in data.iter_mut() {
        *v -= mean;
    }
    Ok(Grid2 { width: size, height: size, data })
}

/// Same-size 2D correlation with zero padding. Kernel is centered; it is
/// symmetric here so correlation equals convolution.
fn correlate2(img: &[f64], w: usize, h: usize, kernel: &Grid2) -> Vec<f64> {
    let kh = (kernel.width / 2) as isize;
    let mut out = vec![0.0f64; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for dy in -kh..=kh {
                let iy = y + dy;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                let krow = ((dy + kh) as usize) * kernel.width;
                let irow = iy as usize * w;
                for dx in -kh..=kh {
                    let ix = x + dx;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    acc += kernel.data[krow + (dx + kh) as usize] * img[irow + ix as usize];
                }
            }
            out[y as usize * w + x as usize] = acc;
        }
    }
    out
}

/// Per-slice NHFEN ratios; `None` marks slices whose filtered ground truth
/// has norm at or below `1e-9 × max|gt|` (skipped in the average).
pub fn nhfen_per_slice(gt: &Volume3D, x: &Volume3D, mask: &Mask3) -> Result<Vec<Option<f64>>> {
    if gt.nx != x.nx || gt.ny != x.ny || gt.nz != x.nz || gt.nx != mask.nx || gt.ny != mask.ny || gt.nz != mask.nz {
        return Err(Error::DimMismatch("nhfen inputs must share dimensions".into()));
    }
    let kernel = log_kernel(15, 1.5)?;
    let gt_max = gt.data.iter().fold(0.0f64, |m, &v| m.max((v as f64).abs()));
    let eps = 1e-9 * gt_max;

    let (w, h) = (gt.nx, gt.ny);
    let per_slice: Vec<Option<f64>> = parallel::map_indexed(gt.nz, |z| {
        let mut a = vec![0.0f64; w * h];
        let mut b = vec![0.0f64; w * h];
        let gs = gt.slice(z);
        let xs = x.slice(z);
        let ms = &mask.data[z * w * h..(z + 1) * w * h];
        for i in 0..w * h {
            if ms[i] {
                a[i] = gs[i] as f64;
                b[i] = xs[i] as f64;
            }
        }
        let fa = correlate2(&a, w, h, &kernel);
        let fb = correlate2(&b, w, h, &kernel);
        let den = math::sqrt(fa.iter().map(|&v| v * v).sum::<f64>());
        if den <= eps {
            return None;
        }
        let num =
            math::sqrt(fa.iter().zip(&fb).map(|(&p, &q)| (p - q) * (p - q)).sum::<f64>());
        Some(num / den)
    });
    Ok(per_slice)
}

/// Normalized high-frequency error norm: slice-averaged LoG-filtered L2
/// error with per-slice normalization. Slices whose filtered ground truth
/// has norm below `1e-9 × max|gt|` are skipped; it is an error if every
/// slice is skipped.
pub fn nhfen(gt: &Volume3D, x: &Volume3D, mask: &Mask3) -> Result<f64> {
    let kept: Vec<f64> = nhfen_per_slice(gt, x, mask)?.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::InvalidArgument(
            "every slice was skipped: filtered ground truth is empty".into(),
        ));
    }
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_volume(n: usize, seed: u64) -> Volume3D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = Volume3D::zeros(n, n, n, 1.0);
        for x in v.data.iter_mut() {
            *x = rng.random::<f32>();
        }
        v
    }

    fn full_mask(n: usize) -> Mask3 {
        let mut m = Mask3::new(n, n, n);
        for v in m.data.iter_mut() {
            *v = true;
        }
        m
    }

    // ---- nmae ----

    #[test]
    fn nmae_of_identical_volumes_is_zero() {
        let gt = random_volume(6, 1);
        let m = full_mask(6);
        assert_eq!(nmae(&gt, &gt, &m).unwrap(), 0.0);
    }

    #[test]
    fn nmae_of_zero_reconstruction_is_one() {
        let gt = random_volume(6, 2);
        let zero = Volume3D::zeros(6, 6, 6, 1.0);
        let m = full_mask(6);
        assert!((nmae(&gt, &zero, &m).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nmae_matches_loop_oracle() {
        for seed in 0..20 {
            let gt = random_volume(4, 100 + seed);
            let x = random_volume(4, 200 + seed);
            let mut mask = Mask3::new(4, 4, 4);
            let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
            for m in mask.data.iter_mut() {
                *m = rng.random::<f32>() < 0.5;
            }
            if mask.count() == 0 {
                continue;
            }

            // Independent triple-loop oracle.
            let mut num = 0.0f64;
            let mut den = 0.0f64;
            for z in 0..4 {
                for y in 0..4 {
                    for x_ in 0..4 {
                        let i = x_ + 4 * (y + 4 * z);
                        if mask.data[i] {
                            num += (gt.data[i] as f64 - x.data[i] as f64).abs();
                            den += (gt.data[i] as f64).abs();
                        }
                    }
                }
            }
            let expect = num / den;
            assert!((nmae(&gt, &x, &mask).unwrap() - expect).abs() <= 1e-12);
        }
    }

    #[test]
    fn nmae_scale_covariance_and_mask_independence() {
        let gt = random_volume(5, 7);
        let m = full_mask(5);
        for c in [0.25f32, -0.5, 1.5] {
            let mut x = gt.clone();
            for (xv, &g) in x.data.iter_mut().zip(&gt.data) {
                *xv = (1.0 + c) * g;
            }
            assert!((nmae(&gt, &x, &m).unwrap() - c.abs() as f64).abs() < 1e-6);
        }

        // Values outside the mask are irrelevant.
        let mut half = full_mask(5);
        for i in 0..half.data.len() / 2 {
            half.data[i] = false;
        }
        let x = random_volume(5, 8);
        let base = nmae(&gt, &x, &half).unwrap();
        let mut x2 = x.clone();
        for i in 0..half.data.len() {
            if !half.data[i] {
                x2.data[i] += 123.0;
            }
        }
        assert_eq!(nmae(&gt, &x2, &half).unwrap(), base);
    }

    #[test]
    fn nmae_zero_denominator_is_an_error() {
        let gt = Volume3D::zeros(3, 3, 3, 1.0);
        let x = random_volume(3, 9);
        let m = full_mask(3);
        assert!(nmae(&gt, &x, &m).is_err());
    }

    // ---- mask ----

    #[test]
    fn binary_volume_mask_is_exact_support() {
        let mut gt = Volume3D::zeros(8, 8, 8, 1.0);
        for z in 2..6 {
            for y in 2..6 {
                for x in 2..6 {
                    let i = gt.idx(x, y, z);
                    gt.data[i] = 1.0;
                }
            }
        }
        let mask = make_mask(&gt, 0).unwrap();
        for i in 0..gt.data.len() {
            assert_eq!(mask.data[i], gt.data[i] > 0.0);
        }
    }

    #[test]
    fn radius_one_dilation_of_single_voxel_is_seven_voxels() {
        let mut gt = Volume3D::zeros(7, 7, 7, 1.0);
        let i = gt.idx(3, 3, 3);
        gt.data[i] = 1.0;
        let mask = make_mask(&gt, 1).unwrap();
        assert_eq!(mask.count(), 7);
        assert!(mask.data[mask.idx(3, 3, 3)]);
        assert!(mask.data[mask.idx(2, 3, 3)] && mask.data[mask.idx(4, 3, 3)]);
        assert!(mask.data[mask.idx(3, 2, 3)] && mask.data[mask.idx(3, 4, 3)]);
        assert!(mask.data[mask.idx(3, 3, 2)] && mask.data[mask.idx(3, 3, 4)]);
    }

    #[test]
    fn mask_is_monotone_in_radius() {
        let gt = {
            let mut v = Volume3D::zeros(10, 10, 10, 1.0);
            for z in 4..7 {
                for y in 3..6 {
                    for x in 5..8 {
                        let i = v.idx(x, y, z);
                        v.data[i] = 0.03;
                    }
                }
            }
            v
        };
        let mut prev = make_mask(&gt, 0).unwrap();
        for r in 1..4 {
            let cur = make_mask(&gt, r).unwrap();
            for i in 0..prev.data.len() {
                assert!(!prev.data[i] || cur.data[i], "mask not monotone at radius {r}");
            }
            prev = cur;
        }
    }

    #[test]
    fn constant_volume_mask_is_an_error() {
        let gt = Volume3D::zeros(4, 4, 4, 1.0);
        assert!(make_mask(&gt, 1).is_err());
    }

    // ---- LoG kernel ----

    #[test]
    fn log_kernel_sums_to_zero_and_is_symmetric() {
        let k = log_kernel(15, 1.5).unwrap();
        let sum: f64 = k.data.iter().sum();
        assert!(sum.abs() <= 1e-12);
        for y in 0..15 {
            for x in 0..15 {
                let v = k.at(x, y);
                assert_eq!(v, k.at(y, x));
                assert_eq!(v, k.at(14 - x, y));
                assert_eq!(v, k.at(x, 14 - y));
            }
        }
    }

    #[test]
    fn log_kernel_center_is_minimum() {
        let k = log_kernel(15, 1.5).unwrap();
        let center = k.at(7, 7);
        for (i, &v) in k.data.iter().enumerate() {
            if i != 7 + 15 * 7 {
                assert!(center < v);
            }
        }
    }

    #[test]
    fn log_kernel_rejects_even_size() {
        assert!(log_kernel(14, 1.5).is_err());
    }

    // ---- nhfen ----

    #[test]
    fn nhfen_of_identical_volumes_is_zero() {
        let gt = random_volume(12, 11);
        let m = full_mask(12);
        assert_eq!(nhfen(&gt, &gt, &m).unwrap(), 0.0);
    }

    #[test]
    fn nhfen_matches_loop_oracle() {
        // Independent per-slice oracle with its own correlation loop.
        let n = 8;
        for seed in 0..10 {
            let gt = random_volume(n, 400 + seed);
            let x = random_volume(n, 500 + seed);
            let m = full_mask(n);
            let got = nhfen(&gt, &x, &m).unwrap();

            let k = log_kernel(15, 1.5).unwrap();
            let kh = 7isize;
            let filt = |img: &Vec<f64>| -> Vec<f64> {
                let mut out = vec![0.0f64; n * n];
                for y in 0..n as isize {
                    for xx in 0..n as isize {
                        let mut acc = 0.0;
                        for dy in -kh..=kh {
                            for dx in -kh..=kh {
                                let iy = y + dy;
                                let ix = xx + dx;
                                if iy < 0 || ix < 0 || iy >= n as isize || ix >= n as isize {
                                    continue;
                                }
                                acc += k.at((dx + kh) as usize, (dy + kh) as usize)
                                    * img[iy as usize * n + ix as usize];
                            }
                        }
                        out[y as usize * n + xx as usize] = acc;
                    }
                }
                out
            };

            let mut total = 0.0;
            let mut kept = 0usize;
            for z in 0..n {
                let a: Vec<f64> = gt.slice(z).iter().map(|&v| v as f64).collect();
                let b: Vec<f64> = x.slice(z).iter().map(|&v| v as f64).collect();
                let fa = filt(&a);
                let fb = filt(&b);
                let den: f64 = fa.iter().map(|v| v * v).sum::<f64>().sqrt();
                if den < 1e-9 {
                    continue;
                }
                let num: f64 =
                    fa.iter().zip(&fb).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
                total += num / den;
                kept += 1;
            }
            let expect = total / kept as f64;
            assert!((got - expect).abs() <= 1e-10, "nhfen {got} vs oracle {expect}");
        }
    }

    #[test]
    fn nhfen_skips_empty_slices_and_errors_when_all_empty() {
        let n = 10;
        let mut gt = Volume3D::zeros(n, n, n, 1.0);
        // Object only on slices 4..6.
        for z in 4..6 {
            for y in 3..7 {
                for x in 3..7 {
                    let i = gt.idx(x, y, z);
                    gt.data[i] = 0.02 + 0.001 * (x + y) as f32;
                }
            }
        }
        let m = full_mask(n);
        assert!(nhfen(&gt, &gt, &m).is_ok());

        let zero = Volume3D::zeros(n, n, n, 1.0);
        assert!(nhfen(&zero, &gt, &m).is_err());
    }

    #[test]
    fn nhfen_interior_invariant_to_global_constant() {
        // Adding the same constant to both inputs only perturbs the
        // zero-padding boundary ring; comparisons restricted to the interior
        // agree to 1e-3.
        let n = 40;
        let mut gt = Volume3D::zeros(n, n, n, 1.0);
        let mut x = Volume3D::zeros(n, n, n, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for z in 12..28 {
            for y in 12..28 {
                for xx in 12..28 {
                    let i = gt.idx(xx, y, z);
                    let base = 0.02
                        + 0.008 * ((xx as f64 * 0.7).sin() * (y as f64 * 0.5).cos()) as f32;
                    gt.data[i] = base;
                    x.data[i] = base + 0.004 * (rng.random::<f32>() - 0.5);
                }
            }
        }

        let k = log_kernel(15, 1.5).unwrap();
        let crop = 8usize;
        let ratio_interior = |gt: &Volume3D, x: &Volume3D| -> f64 {
            let mut total = 0.0;
            let mut kept = 0usize;
            for z in 0..n {
                let a: Vec<f64> = gt.slice(z).iter().map(|&v| v as f64).collect();
                let b: Vec<f64> = x.slice(z).iter().map(|&v| v as f64).collect();
                let fa = correlate2(&a, n, n, &k);
                let fb = correlate2(&b, n, n, &k);
                let mut den = 0.0;
                let mut num = 0.0;
                for y in crop..n - crop {
                    for xx in crop..n - crop {
                        let i = y * n + xx;
                        den += fa[i] * fa[i];
                        num += (fa[i] - fb[i]) * (fa[i] - fb[i]);
                    }
                }
                if den.sqrt() < 1e-12 {
                    continue;
                }
                total += num.sqrt() / den.sqrt();
                kept += 1;
            }
            total / kept as f64
        };

        let base = ratio_interior(&gt, &x);
        let mut gt_c = gt.clone();
        let mut x_c = x.clone();
        for v in gt_c.data.iter_mut() {
            *v += 0.5;
        }
        for v in x_c.data.iter_mut() {
            *v += 0.5;
        }
        let shifted = ratio_interior(&gt_c, &x_c);
        assert!((base - shifted).abs() <= 1e-3, "{base} vs {shifted}");
    }
}
