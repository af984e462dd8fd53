//! Data-consistency update: regularized least squares solved with CG.
//!
//! Solves `min_x ‖Ax − y‖² + β‖x − x_g‖²` by running linear conjugate
//! gradient on the normal equations `(AᵀA + βI)x = Aᵀy + βx_g`, warm-started
//! at the prior `x_g`. The operator is symmetric positive definite because
//! the projector pair is exactly matched and `β > 0`, so the objective is
//! non-increasing across iterations; a consistent prior (`y = A x_g`) is a
//! fixed point returned unchanged.
//!
//! Solver state is double precision end to end. The objective trace is
//! tracked incrementally from the same products CG already computes, so
//! recording it costs no extra projections.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::projector::{backproject_f64, check_sino_matches, forward_f64, lift_f32};
use crate::types::{Error, Result, Sinogram, Volume3D};

/// Outcome of a data-consistency solve.
#[derive(Debug, Clone)]
pub struct DcResult {
    pub volume: Volume3D,
    /// `objectives[0]` is the objective at `x_g`; one entry per iteration.
    pub objectives: Vec<f64>,
    /// CG iterations actually run (may stop early at a zero residual).
    pub iterations: usize,
    /// Set when a non-positive curvature direction forced an early return.
    pub breakdown: bool,
}

/// Options beyond the stated defaults.
#[derive(Debug, Clone, Copy)]
pub struct DcOptions {
    /// Clamp the solution nonnegative after the solve (the solve itself is
    /// unconstrained; clamping inside CG would break its invariants).
    pub nonneg_clamp: bool,
}

impl Default for DcOptions {
    fn default() -> Self {
        Self { nonneg_clamp: true }
    }
}

/// Runs `n_cg` CG iterations on `(AᵀA + βI)x = Aᵀy + βx_g` from `x_g`.
pub fn data_consistency(
    x_g: &Volume3D,
    y: &Sinogram,
    beta: f64,
    n_cg: usize,
    opts: DcOptions,
) -> Result<DcResult> {
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    if n_cg == 0 {
        return Err(Error::InvalidArgument(String::from("n_cg must be at least 1")));
    }
    x_g.check_matches(&y.geometry)?;
    check_sino_matches(y, &y.geometry, &y.views)?;

    let geom = y.geometry.clone();
    let views = y.views.clone();
    let xg = lift_f32(&x_g.data);
    let y_f64 = lift_f32(&y.data);
    let n = xg.len();

    // rhs = Aᵀy + β·x_g
    let mut rhs = backproject_f64(&y_f64, &geom, &views);
    for (r, &g) in rhs.iter_mut().zip(&xg) {
        *r += beta * g;
    }

    // x = x_g; r = rhs − (AᵀA + βI)x
    let mut x = xg.clone();
    let mut ax = forward_f64(&x, &geom, &views);
    let atax = backproject_f64(&ax, &geom, &views);
    let mut r: Vec<f64> = (0..n).map(|i| rhs[i] - atax[i] - beta * x[i]).collect();
    let mut p = r.clone();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();

    let rhs_norm2: f64 = rhs.iter().map(|v| v * v).sum();
    let stop_tol = 1e-28 * rhs_norm2.max(1e-300);

    let objective = |ax: &[f64], x: &[f64]| -> f64 {
        let data: f64 = ax.iter().zip(&y_f64).map(|(&a, &b)| (a - b) * (a - b)).sum();
        let prior: f64 = x.iter().zip(&xg).map(|(&a, &b)| (a - b) * (a - b)).sum();
        data + beta * prior
    };

    let mut objectives = Vec::with_capacity(n_cg + 1);
    objectives.push(objective(&ax, &x));

    let mut breakdown = false;
    let mut iterations = 0usize;
    for _ in 0..n_cg {
        if rr <= stop_tol {
            break; // converged (consistent prior hits this immediately)
        }
        let ap = forward_f64(&p, &geom, &views);
        let mut hp = backproject_f64(&ap, &geom, &views);
        for (h, &pv) in hp.iter_mut().zip(&p) {
            *h += beta * pv;
        }
        let curvature: f64 = p.iter().zip(&hp).map(|(&a, &b)| a * b).sum();
        if curvature <= 0.0 {
            breakdown = true;
            break;
        }
        let alpha = rr / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * hp[i];
        }
        for (a, &apv) in ax.iter_mut().zip(&ap) {
            *a += alpha * apv;
        }
        iterations += 1;
        objectives.push(objective(&ax, &x));

        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta_cg = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta_cg * p[i];
        }
        rr = rr_new;
    }

    let mut volume = Volume3D::zeros(x_g.nx, x_g.ny, x_g.nz, x_g.voxel_mm);
    for (o, &v) in volume.data.iter_mut().zip(&x) {
        *o = if opts.nonneg_clamp { (v.max(0.0)) as f32 } else { v as f32 };
    }
    Ok(DcResult { volume, objectives, iterations, breakdown })
}
