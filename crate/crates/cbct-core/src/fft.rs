//! Minimal power-of-two complex FFT.
//!
//! The ramp filter only ever transforms detector rows zero-padded to a
//! power of two (a few hundred samples), so a plain iterative radix-2
//! Cooley–Tukey with precomputed twiddles is all that is needed, and it
//! keeps the crate free of `std`-only FFT dependencies.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Complex value as (re, im).
pub type C64 = (f64, f64);

/// In-place FFT of a power-of-two-length buffer.
/// `inverse` applies the conjugate transform and the 1/n scale.
pub fn fft_in_place(buf: &mut [C64], inverse: bool) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }

    // Bit-reversal permutation.
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }

    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * core::f64::consts::PI / len as f64;
        let (wr, wi) = (math::cos(ang), math::sin(ang));
        let mut start = 0;
        while start < n {
            let (mut cr, mut ci) = (1.0f64, 0.0f64);
            for k in 0..len / 2 {
                let (ar, ai) = buf[start + k];
                let (br, bi) = buf[start + k + len / 2];
                let (tr, ti) = (br * cr - bi * ci, br * ci + bi * cr);
                buf[start + k] = (ar + tr, ai + ti);
                buf[start + k + len / 2] = (ar - tr, ai - ti);
                let next = (cr * wr - ci * wi, cr * wi + ci * wr);
                cr = next.0;
                ci = next.1;
            }
            start += len;
        }
        len <<= 1;
    }

    if inverse {
        let scale = 1.0 / n as f64;
        for v in buf.iter_mut() {
            v.0 *= scale;
            v.1 *= scale;
        }
    }
}

/// Smallest power of two that is at least `n`.
pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Convenience: real forward transform into a fresh complex buffer of
/// length `padded` (≥ input length, power of two).
pub fn fft_real(input: &[f64], padded: usize) -> Vec<C64> {
    let mut buf = vec![(0.0, 0.0); padded];
    for (dst, &src) in buf.iter_mut().zip(input) {
        dst.0 = src;
    }
    fft_in_place(&mut buf, false);
    buf
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(input: &[C64], inverse: bool) -> Vec<C64> {
        let n = input.len();
        let sign = if inverse { 1.0 } else { -1.0 };
        let mut out = vec![(0.0, 0.0); n];
        for (k, o) in out.iter_mut().enumerate() {
            for (t, &(re, im)) in input.iter().enumerate() {
                let ang = sign * 2.0 * core::f64::consts::PI * (k * t) as f64 / n as f64;
                let (c, s) = (ang.cos(), ang.sin());
                o.0 += re * c - im * s;
                o.1 += re * s + im * c;
            }
        }
        if inverse {
            for o in out.iter_mut() {
                o.0 /= n as f64;
                o.1 /= n as f64;
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft() {
        let n = 64;
        let input: Vec<C64> = (0..n)
            .map(|i| (((i * 7 + 3) % 11) as f64 - 5.0, ((i * 5 + 1) % 13) as f64 / 3.0))
            .collect();
        let mut fast = input.clone();
        fft_in_place(&mut fast, false);
        let slow = naive_dft(&input, false);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
        }
    }

    #[test]
    fn round_trip_identity() {
        let n = 128;
        let input: Vec<C64> = (0..n).map(|i| ((i as f64).sin(), (i as f64 * 0.7).cos())).collect();
        let mut buf = input.clone();
        fft_in_place(&mut buf, false);
        fft_in_place(&mut buf, true);
        for (a, b) in buf.iter().zip(&input) {
            assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        }
    }
}
