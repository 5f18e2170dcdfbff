//! Penalty scaled by the empirical residual variance.
//!
//! The estimate solves `lambda^2 = C_var * ||y - X b_lambda||^2 / n * log p`,
//! equivalently `Gamma_A(lambda) = C_var` with
//! `Gamma_A(lambda) = n / log p * lambda^2 / ||y - X b_lambda||^2`, which is
//! non-decreasing in `lambda`. Two solvers are provided: the fixed-point
//! iteration `lambda <- sqrt(C_var log p / n) ||y - X b_lambda||` and an exact
//! root finder that solves the equation segment by segment on the path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lasso::{eval_path, solve_lasso, tau_threshold, LassoPath, Segment, SolverConfig};
use crate::model::DesignMatrix;
use crate::theory::{constants, TheoryParams};
use crate::tuned::{Backend, Inner, TuneMethod, TunedEstimate, PATH_FLOOR};

/// `C_var = 8` makes the tuned penalty `2 sigma_hat sqrt(2 log p)`.
pub const DEFAULT_CVAR: f64 = 8.0;

fn log_p(x: &DesignMatrix) -> f64 {
    (x.p() as f64).ln()
}

fn gamma_a_from(n: usize, log_p: f64, lambda: f64, resid_sq: f64) -> Result<f64> {
    if !(resid_sq > 0.0) {
        return Err(Error::ZeroResidual(lambda));
    }
    Ok(n as f64 / log_p * lambda * lambda / resid_sq)
}

/// `Gamma_A` on a path segment (closed form).
pub fn gamma_a_segment(seg: &Segment, n: usize, p: usize, lambda: f64) -> Result<f64> {
    gamma_a_from(n, (p as f64).ln(), lambda, seg.residual_norm_sq(lambda))
}

/// `Gamma_A(lambda)`; uses the path's closed form when one is supplied,
/// coordinate descent otherwise.
pub fn gamma_a(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    path: Option<&LassoPath<'_>>,
) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let resid_sq = match path {
        Some(path) => path.residual_norm_sq(lambda)?,
        None => solve_lasso(x, y, lambda, &SolverConfig::default())?.residual_norm_sq(),
    };
    gamma_a_from(x.n(), log_p(x), lambda, resid_sq)
}

/// Options of the fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    /// Starting penalty; `tau` when unset.
    pub lambda0: Option<f64>,
    /// Absolute stopping tolerance on successive iterates; `1e-8 * tau` when unset.
    pub eps: Option<f64>,
    pub max_iter: usize,
    pub backend: Backend,
    /// Lower end of the precomputed path, relative to `tau`.
    pub path_floor: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            lambda0: None,
            eps: None,
            max_iter: 200,
            backend: Backend::Path,
            path_floor: PATH_FLOOR,
        }
    }
}

/// Fixed-point iteration `lambda <- sqrt(cvar * log p / n) * ||y - X b_lambda||`.
///
/// A run that exhausts `max_iter` returns an estimate with `converged = false`.
pub fn tune_fixed_point(
    x: &DesignMatrix,
    y: &[f64],
    cvar: f64,
    cfg: &FixedPointConfig,
) -> Result<TunedEstimate> {
    if !(cvar > 0.0) {
        return Err(Error::InvalidInput(format!(
            "cvar must be positive, got {cvar}"
        )));
    }
    let tau = tau_threshold(x, y);
    if tau == 0.0 {
        return Err(Error::InvalidInput(
            "X^t y vanishes; nothing to tune".into(),
        ));
    }
    let lambda0 = cfg.lambda0.unwrap_or(tau);
    let eps = cfg.eps.unwrap_or(1e-8 * tau);
    if !(lambda0 > 0.0) || !(eps > 0.0) {
        return Err(Error::InvalidInput(
            "lambda0 and eps must be positive".into(),
        ));
    }
    let mut inner = Inner::new(x, y, cfg.backend, cfg.path_floor)?;
    let n = x.n() as f64;
    let scale = (cvar * log_p(x) / n).sqrt();

    let mut lambda = lambda0;
    let mut history = vec![(0, lambda)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let sol = inner.solve(lambda)?;
        let next = scale * sol.residual_norm_sq().sqrt();
        if !(next > 0.0) {
            return Err(Error::ZeroResidual(lambda));
        }
        history.push((iterations, next));
        let step = (next - lambda).abs();
        lambda = next;
        if step < eps {
            converged = true;
            break;
        }
    }
    let sol = inner.solve(lambda)?;
    let sigma_hat = (sol.residual_norm_sq() / n).sqrt();
    Ok(TunedEstimate::from_solution(
        sol,
        sigma_hat,
        TuneMethod::FixedPoint,
        iterations,
        converged,
        history,
    ))
}

/// Root of `Gamma_A(lambda) = cvar` on an existing path, scanning from `tau`
/// downwards and returning the largest root.
pub fn root_on_path_a(path: &LassoPath<'_>, cvar: f64) -> Result<f64> {
    let x = path.design();
    let (n, p) = (x.n(), x.p());
    let ratio = n as f64 / (p as f64).ln();
    // zero region: Gamma_A = ratio * lambda^2 / ||y||^2
    let zero_root = (cvar / ratio * path.y_norm_sq()).sqrt();
    if zero_root >= path.tau {
        return Ok(zero_root);
    }
    for seg in &path.segments {
        let den = ratio - cvar * seg.sign_quad;
        if den <= 0.0 || seg.resid_perp_sq <= 0.0 {
            continue;
        }
        let root = (cvar * seg.resid_perp_sq / den).sqrt();
        let slack = 1e-12 * seg.lambda_hi;
        if root <= seg.lambda_hi + slack && root >= seg.lambda_lo - slack {
            return Ok(root.clamp(seg.lambda_lo, seg.lambda_hi));
        }
    }
    let lowest = path.lowest_lambda();
    let lo = path
        .residual_norm_sq(lowest)
        .ok()
        .filter(|r| *r > 0.0)
        .map_or(0.0, |r| ratio * lowest * lowest / r);
    Err(Error::RootNotAttainable {
        target: cvar,
        lo,
        hi: f64::INFINITY,
    })
}

/// Exact solution of `Gamma_A(lambda) = cvar` from the homotopy path.
pub fn tune_path_exact_a(x: &DesignMatrix, y: &[f64], cvar: f64) -> Result<TunedEstimate> {
    let tau = tau_threshold(x, y);
    if tau == 0.0 {
        return Err(Error::InvalidInput(
            "X^t y vanishes; nothing to tune".into(),
        ));
    }
    let path = crate::lasso::homotopy_path(x, y, PATH_FLOOR * tau)?;
    tune_path_exact_a_on(&path, cvar)
}

/// [`tune_path_exact_a`] on a precomputed path.
pub fn tune_path_exact_a_on(path: &LassoPath<'_>, cvar: f64) -> Result<TunedEstimate> {
    if !(cvar > 0.0) {
        return Err(Error::InvalidInput(format!(
            "cvar must be positive, got {cvar}"
        )));
    }
    let lambda = root_on_path_a(path, cvar)?;
    let sol = eval_path(path, lambda)?;
    let sigma_hat = (sol.residual_norm_sq() / path.design().n() as f64).sqrt();
    Ok(TunedEstimate::from_solution(
        sol,
        sigma_hat,
        TuneMethod::PathExact,
        1,
        true,
        vec![(0, lambda)],
    ))
}

/// The admissible `C_var` range `[lo, hi]` of the exact-recovery guarantee,
/// `(1-r)^2 / (k (1+r) C_spar) * n / p * ||X||^2` for `k = 20, 2`.
pub fn cvar_admissible_interval(x: &DesignMatrix, params: &TheoryParams) -> Result<(f64, f64)> {
    let opnorm = x.opnorm()?;
    Ok(cvar_interval_from(x.n(), x.p(), opnorm * opnorm, params))
}

/// [`cvar_admissible_interval`] from a known `||X||^2`.
pub fn cvar_interval_from(n: usize, p: usize, opnorm_sq: f64, params: &TheoryParams) -> (f64, f64) {
    let (c_spar, _) = constants(params);
    let r = params.r;
    let base = (1.0 - r).powi(2) / ((1.0 + r) * c_spar) * n as f64 / p as f64 * opnorm_sq;
    (base / 20.0, base / 2.0)
}
