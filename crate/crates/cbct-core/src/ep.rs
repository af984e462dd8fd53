//! Edge-preserving regularized iterative reconstruction.
//!
//! Minimizes `Φ(x) = ½‖Ax − y‖² + β · Σ ψ_δ(x_j − x_k)` over 6-connected
//! first differences, with the hyperbola potential
//! `ψ_δ(t) = δ²(√(1 + (t/δ)²) − 1)` — quadratic for `|t| ≪ δ`, linear for
//! `|t| ≫ δ`, so edges survive while streaks are smoothed.
//!
//! The solver is Polak–Ribière nonlinear conjugate gradient with restart on
//! non-descent directions. The initial step comes from the quadratic
//! majorizer (`ψ'' ≤ 1`), and a backtracking loop accepts a step only when
//! the objective of the clamped iterate actually decreases, so the
//! per-iteration objective trace is non-increasing by construction. Voxels
//! are clamped nonnegative after each step. All solver state is double
//! precision; volumes cross the API boundary in single precision.

use alloc::format;
use alloc::vec::Vec;

use crate::math;
use crate::projector::{backproject_f64, forward_f64, lift_f32};
use crate::types::{Error, Result, Sinogram, Volume3D};

/// Edge-preserving reconstruction parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EpConfig {
    /// Regularization weight.
    pub beta: f64,
    /// Edge-preserving transition parameter (attenuation units).
    pub delta: f64,
    /// Conjugate-gradient iterations.
    pub n_iters: usize,
}

impl EpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::InvalidArgument("beta_ep must be positive".into()));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidArgument("delta must be positive".into()));
        }
        if self.n_iters == 0 {
            return Err(Error::InvalidArgument("n_iters must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for EpConfig {
    /// Defaults tuned once on the desk-scale training phantom at 8 views
    /// (grid search over regularization weights and iteration counts,
    /// minimizing masked NMAE) and frozen; `delta` is 10% of the phantom
    /// shell attenuation.
    fn default() -> Self {
        Self { beta: 0.3, delta: 0.004, n_iters: 60 }
    }
}

/// Hyperbola potential `ψ_δ(t)`.
#[inline]
pub fn potential(t: f64, delta: f64) -> f64 {
    let s = t / delta;
    delta * delta * (math::sqrt(1.0 + s * s) - 1.0)
}

/// Derivative `ψ'_δ(t) = t / √(1 + (t/δ)²)`.
#[inline]
pub fn potential_deriv(t: f64, delta: f64) -> f64 {
    let s = t / delta;
    t / math::sqrt(1.0 + s * s)
}

/// Sum of `ψ_δ` over the three forward-difference directions.
fn regularizer(x: &[f64], nx: usize, ny: usize, nz: usize, delta: f64) -> f64 {
    let mut total = 0.0f64;
    let step_y = nx;
    let step_z = nx * ny;
    for z in 0..nz {
        for y in 0..ny {
            let row = nx * (y + ny * z);
            for i in row..row + nx {
                let v = x[i];
                if i + 1 < row + nx {
                    total += potential(v - x[i + 1], delta);
                }
                if y + 1 < ny {
                    total += potential(v - x[i + step_y], delta);
                }
                if z + 1 < nz {
                    total += potential(v - x[i + step_z], delta);
                }
            }
        }
    }
    total
}

/// Adds `β · ∇reg` into `grad`.
fn add_regularizer_gradient(
    grad: &mut [f64],
    x: &[f64],
    nx: usize,
    ny: usize,
    nz: usize,
    delta: f64,
    beta: f64,
) {
    let step_y = nx;
    let step_z = nx * ny;
    for z in 0..nz {
        for y in 0..ny {
            let row = nx * (y + ny * z);
            for i in row..row + nx {
                let v = x[i];
                if i + 1 < row + nx {
                    let d = beta * potential_deriv(v - x[i + 1], delta);
                    grad[i] += d;
                    grad[i + 1] -= d;
                }
                if y + 1 < ny {
                    let d = beta * potential_deriv(v - x[i + step_y], delta);
                    grad[i] += d;
                    grad[i + step_y] -= d;
                }
                if z + 1 < nz {
                    let d = beta * potential_deriv(v - x[i + step_z], delta);
                    grad[i] += d;
                    grad[i + step_z] -= d;
                }
            }
        }
    }
}

/// Upper bound on the regularizer curvature along direction `d` (`ψ'' ≤ 1`).
fn regularizer_curvature_bound(d: &[f64], nx: usize, ny: usize, nz: usize) -> f64 {
    let step_y = nx;
    let step_z = nx * ny;
    let mut total = 0.0f64;
    for z in 0..nz {
        for y in 0..ny {
            let row = nx * (y + ny * z);
            for i in row..row + nx {
                if i + 1 < row + nx {
                    let t = d[i] - d[i + 1];
                    total += t * t;
                }
                if y + 1 < ny {
                    let t = d[i] - d[i + step_y];
                    total += t * t;
                }
                if z + 1 < nz {
                    let t = d[i] - d[i + step_z];
                    total += t * t;
                }
            }
        }
    }
    total
}

fn data_term(ax: &[f64], y: &[f64]) -> f64 {
    let mut total = 0.0f64;
    for (&a, &b) in ax.iter().zip(y) {
        let r = a - b;
        total += r * r;
    }
    0.5 * total
}

fn objective_f64(x: &[f64], y_f64: &[f64], y: &Sinogram, cfg: &EpConfig) -> f64 {
    let geom = &y.geometry;
    let ax = forward_f64(x, geom, &y.views);
    data_term(&ax, y_f64) + cfg.beta * regularizer(x, geom.vol_nx, geom.vol_ny, geom.vol_nz, cfg.delta)
}

/// The edge-preserving objective `Φ(x)`.
pub fn ep_objective(x: &Volume3D, y: &Sinogram, cfg: &EpConfig) -> Result<f64> {
    cfg.validate()?;
    x.check_matches(&y.geometry)?;
    Ok(objective_f64(&lift_f32(&x.data), &lift_f32(&y.data), y, cfg))
}

/// Gradient `∇Φ(x) = Aᵀ(Ax − y) + β·∇reg(x)`.
pub fn ep_gradient(x: &Volume3D, y: &Sinogram, cfg: &EpConfig) -> Result<Volume3D> {
    cfg.validate()?;
    x.check_matches(&y.geometry)?;
    let geom = &y.geometry;
    let xf = lift_f32(&x.data);
    let mut residual = forward_f64(&xf, geom, &y.views);
    for (r, &m) in residual.iter_mut().zip(&y.data) {
        *r -= m as f64;
    }
    let mut grad = backproject_f64(&residual, geom, &y.views);
    add_regularizer_gradient(&mut grad, &xf, x.nx, x.ny, x.nz, cfg.delta, cfg.beta);

    let mut out = Volume3D::zeros(x.nx, x.ny, x.nz, x.voxel_mm);
    for (o, &g) in out.data.iter_mut().zip(&grad) {
        *o = g as f32;
    }
    Ok(out)
}

/// Reconstruction result with the per-iteration objective trace.
#[derive(Debug, Clone)]
pub struct EpResult {
    pub volume: Volume3D,
    /// `objectives[0]` is `Φ(init)`; one entry follows per iteration.
    pub objectives: Vec<f64>,
}

/// Runs `cfg.n_iters` NCG iterations on `Φ` starting from `init`.
///
/// The returned objective trace is non-increasing; a non-finite objective
/// aborts with the offending iteration index.
pub fn ep_reconstruct(y: &Sinogram, cfg: &EpConfig, init: &Volume3D) -> Result<EpResult> {
    cfg.validate()?;
    init.check_matches(&y.geometry)?;
    let geom = y.geometry.clone();
    let (nx, ny, nz) = (init.nx, init.ny, init.nz);
    let y_f64 = lift_f32(&y.data);

    // Start from the clamped initializer so every iterate is nonnegative.
    let mut x: Vec<f64> = init.data.iter().map(|&v| (v as f64).max(0.0)).collect();
    let mut ax = forward_f64(&x, &geom, &y.views);
    let mut phi = data_term(&ax, &y_f64) + cfg.beta * regularizer(&x, nx, ny, nz, cfg.delta);
    if !phi.is_finite() {
        return Err(Error::NonFinite("objective at initialization".into()));
    }
    let mut objectives = Vec::with_capacity(cfg.n_iters + 1);
    objectives.push(phi);

    let mut g_prev: Vec<f64> = Vec::new();
    let mut d_prev: Vec<f64> = Vec::new();

    for iter in 0..cfg.n_iters {
        // Gradient at the current iterate.
        let residual: Vec<f64> = ax.iter().zip(&y_f64).map(|(&a, &b)| a - b).collect();
        let mut g = backproject_f64(&residual, &geom, &y.views);
        add_regularizer_gradient(&mut g, &x, nx, ny, nz, cfg.delta, cfg.beta);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient at iteration {iter}")));
        }

        // Polak–Ribière direction with restart on non-descent.
        let mut d: Vec<f64>;
        if g_prev.is_empty() {
            d = g.iter().map(|&v| -v).collect();
        } else {
            let gg_prev: f64 = g_prev.iter().map(|v| v * v).sum();
            let num: f64 = g.iter().zip(&g_prev).map(|(&a, &b)| a * (a - b)).sum();
            let beta_pr = (num / gg_prev).max(0.0);
            d = g.iter().zip(&d_prev).map(|(&gv, &dv)| -gv + beta_pr * dv).collect();
            let descent: f64 = d.iter().zip(&g).map(|(&dv, &gv)| dv * gv).sum();
            if descent >= 0.0 {
                d = g.iter().map(|&v| -v).collect();
            }
        }

        // Majorizer-optimal initial step.
        let ad = forward_f64(&d, &geom, &y.views);
        let ad_norm2: f64 = ad.iter().map(|&v| v * v).sum();
        let curv = ad_norm2 + cfg.beta * regularizer_curvature_bound(&d, nx, ny, nz);
        let slope: f64 = g.iter().zip(&d).map(|(&gv, &dv)| gv * dv).sum();
        if curv <= 0.0 || slope >= 0.0 {
            break; // stationary
        }
        let mut alpha = -slope / curv;

        // Backtrack until the clamped trial decreases the objective. The
        // trial's projection is composed from the tracked `Ax` and `Ad`
        // plus a projection of the (sparse) clamp correction, so trials
        // cost no extra dense forward projections.
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial = vec![0.0f64; x.len()];
            let mut corr: Vec<f64> = Vec::new();
            for i in 0..x.len() {
                let raw = x[i] + alpha * d[i];
                if raw < 0.0 {
                    if corr.is_empty() {
                        corr = vec![0.0; x.len()];
                    }
                    corr[i] = -raw;
                    // trial[i] stays 0
                } else {
                    trial[i] = raw;
                }
            }
            let mut ax_trial: Vec<f64> =
                ax.iter().zip(&ad).map(|(&a, &adv)| a + alpha * adv).collect();
            if !corr.is_empty() {
                let ac = forward_f64(&corr, &geom, &y.views);
                for (a, &cv) in ax_trial.iter_mut().zip(&ac) {
                    *a += cv;
                }
            }
            let phi_trial =
                data_term(&ax_trial, &y_f64) + cfg.beta * regularizer(&trial, nx, ny, nz, cfg.delta);
            if !phi_trial.is_finite() {
                return Err(Error::NonFinite(format!("objective at iteration {iter}")));
            }
            if phi_trial <= phi {
                x = trial;
                ax = ax_trial;
                phi = phi_trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        objectives.push(phi);
        if !accepted {
            break; // no further progress possible
        }
        g_prev = g;
        d_prev = d;
    }

    let mut volume = Volume3D::zeros(nx, ny, nz, init.voxel_mm);
    for (o, &v) in volume.data.iter_mut().zip(&x) {
        *o = v as f32;
    }
    Ok(EpResult { volume, objectives })
}
