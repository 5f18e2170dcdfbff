//! Penalty chosen by a penalty-versus-fidelity trade-off.
//!
//! The estimate solves `lambda ||b_lambda||_1 = C ||y - X b_lambda||^2`, that
//! is `Gamma_B(lambda) = C` with
//! `Gamma_B(lambda) = lambda ||b_lambda||_1 / ||y - X b_lambda||^2`.
//! On a path segment with `u = s^t a`, `q = s^t (X_A^t X_A)^{-1} s` and
//! `w = ||P_perp y||^2` this is `lambda (u - lambda q) / (w + lambda^2 q)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lasso::{
    eval_path, homotopy_path, solve_lasso, tau_threshold, LassoPath, LassoSolution, Segment,
    SolverConfig,
};
use crate::model::DesignMatrix;
use crate::tuned::{TuneMethod, TunedEstimate, PATH_FLOOR};

fn ratio(lambda: f64, l1: f64, resid_sq: f64) -> Result<f64> {
    if l1 == 0.0 {
        return Ok(0.0);
    }
    if !(resid_sq > 0.0) {
        return Err(Error::ZeroResidual(lambda));
    }
    Ok(lambda * l1 / resid_sq)
}

/// `Gamma_B` on a path segment.
pub fn gamma_b_segment(seg: &Segment, lambda: f64) -> Result<f64> {
    ratio(lambda, seg.l1_norm(lambda), seg.residual_norm_sq(lambda))
}

/// Exact derivative of `Gamma_B` on the interior of a segment, by the quotient
/// rule applied to `lambda (u - lambda q) / (w + lambda^2 q)`.
pub fn gamma_b_derivative_segment(seg: &Segment, lambda: f64) -> f64 {
    let (u, q, w) = (seg.sign_dot_ls, seg.sign_quad, seg.resid_perp_sq);
    let num = lambda * (u - lambda * q);
    let num_d = u - 2.0 * lambda * q;
    let den = w + lambda * lambda * q;
    let den_d = 2.0 * lambda * q;
    (num_d * den - num * den_d) / (den * den)
}

/// `Gamma_B(lambda)`; closed form with a path, coordinate descent otherwise.
pub fn gamma_b(
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
    match path {
        Some(path) => match path.segment_at(lambda)? {
            Some(seg) => gamma_b_segment(seg, lambda),
            None => Ok(0.0),
        },
        None => {
            let sol = solve_lasso(x, y, lambda, &SolverConfig::default())?;
            ratio(lambda, sol.l1_norm(), sol.residual_norm_sq())
        }
    }
}

/// `dGamma_B / dlambda` at a point strictly inside a path segment.
///
/// When `|A| = n` (so `P_perp y = 0`) this reduces to
/// `-(||b||_1 + lambda q) / ||y - X b||^2`; in general the extra term from the
/// projected residual is retained.
pub fn gamma_b_derivative(path: &LassoPath<'_>, lambda: f64) -> Result<f64> {
    Ok(match path.interior_segment(lambda)? {
        Some(seg) => gamma_b_derivative_segment(seg, lambda),
        None => 0.0,
    })
}

/// `sigma_hat^2 = (||y - X b||^2 + 2 lambda ||b||_1) / n`.
pub fn sigma_hat_b(sol: &LassoSolution, n: usize) -> f64 {
    ((sol.residual_norm_sq() + 2.0 * sol.lambda * sol.l1_norm()) / n as f64).sqrt()
}

/// Options of the safeguarded Newton iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// Starting penalty; `tau / 2` when unset.
    pub lambda0: Option<f64>,
    /// Absolute stopping tolerance; `1e-8 * tau` when unset.
    pub eps: Option<f64>,
    pub max_iter: usize,
    /// Lower end of the path, relative to `tau`.
    pub path_floor: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            lambda0: None,
            eps: None,
            max_iter: 200,
            path_floor: PATH_FLOOR,
        }
    }
}

fn path_for<'a>(x: &'a DesignMatrix, y: &[f64], floor: f64) -> Result<LassoPath<'a>> {
    let tau = tau_threshold(x, y);
    if tau == 0.0 {
        return Err(Error::InvalidInput(
            "X^t y vanishes; nothing to tune".into(),
        ));
    }
    homotopy_path(x, y, floor * tau)
}

/// Newton's method on `Gamma_B(lambda) - C`, safeguarded by a bisection bracket.
pub fn tune_newton(
    x: &DesignMatrix,
    y: &[f64],
    c: f64,
    cfg: &NewtonConfig,
) -> Result<TunedEstimate> {
    let path = path_for(x, y, cfg.path_floor)?;
    tune_newton_on(&path, c, cfg)
}

/// [`tune_newton`] on a precomputed path.
///
/// The bracket `[lo, hi]` keeps `Gamma_B(lo) > C >= Gamma_B(hi)`. A Newton step
/// that leaves the bracket, or meets a non-negative slope, is replaced by
/// bisection. When `Gamma_B = C` has several solutions the iteration settles
/// on one of them, not necessarily the one chosen by [`tune_path_exact_b_on`].
pub fn tune_newton_on(path: &LassoPath<'_>, c: f64, cfg: &NewtonConfig) -> Result<TunedEstimate> {
    if !(c > 0.0) {
        return Err(Error::InvalidInput(format!("C must be positive, got {c}")));
    }
    let tau = path.tau;
    let eps = cfg.eps.unwrap_or(1e-8 * tau);
    let mut hi = tau;
    let mut lo = path.lowest_lambda();
    let g = |lambda: f64| -> Result<f64> {
        Ok(match path.segment_at(lambda)? {
            Some(seg) => gamma_b_segment(seg, lambda)? - c,
            None => -c,
        })
    };
    if g(lo)? <= 0.0 {
        return Err(not_attained(path, c));
    }
    let mut lambda = cfg.lambda0.unwrap_or(0.5 * tau);
    if !(lambda > lo && lambda < hi) {
        lambda = 0.5 * (lo + hi);
    }
    let mut history = vec![(0, lambda)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let value = g(lambda)?;
        if value == 0.0 {
            converged = true;
            break;
        }
        if value > 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        // one-sided slope at breakpoints: use the segment found by lookup
        let slope = match path.segment_at(lambda)? {
            Some(seg) => gamma_b_derivative_segment(seg, lambda),
            None => 0.0,
        };
        let newton = lambda - value / slope;
        let next = if slope < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        history.push((iterations, next));
        let step = (next - lambda).abs();
        lambda = next;
        if step < eps || hi - lo < eps {
            converged = true;
            break;
        }
    }
    let sol = eval_path(path, lambda)?;
    let sigma_hat = sigma_hat_b(&sol, path.design().n());
    Ok(TunedEstimate::from_solution(
        sol,
        sigma_hat,
        TuneMethod::Newton,
        iterations,
        converged,
        history,
    ))
}

fn not_attained(path: &LassoPath<'_>, c: f64) -> Error {
    let mut hi = 0.0f64;
    for seg in &path.segments {
        for lambda in [seg.lambda_hi, seg.lambda_lo, seg.midpoint()] {
            if let Ok(v) = gamma_b_segment(seg, lambda) {
                hi = hi.max(v);
            }
        }
    }
    Error::RootNotAttainable {
        target: c,
        lo: 0.0,
        hi,
    }
}

/// A solution of `Gamma_B(lambda) = C` and the slope of `Gamma_B` there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRoot {
    pub lambda: f64,
    pub slope: f64,
}

/// All solutions of `Gamma_B(lambda) = C` on the path, in decreasing order.
///
/// On a segment the equation is the quadratic
/// `(1 + C) q lambda^2 - u lambda + C w = 0`.
pub fn roots_on_path_b(path: &LassoPath<'_>, c: f64) -> Vec<PathRoot> {
    let mut roots: Vec<PathRoot> = Vec::new();
    for seg in &path.segments {
        let (u, q, w) = (seg.sign_dot_ls, seg.sign_quad, seg.resid_perp_sq.max(0.0));
        let qa = (1.0 + c) * q;
        let disc = u * u - 4.0 * qa * c * w;
        if qa <= 0.0 || disc < 0.0 {
            continue;
        }
        // numerically stable pair of roots
        let t = 0.5 * (u + u.signum() * disc.sqrt());
        let mut cands = vec![t / qa];
        if t != 0.0 {
            cands.push(c * w / t);
        }
        cands.sort_by(|a, b| b.total_cmp(a));
        let slack = 1e-12 * seg.lambda_hi;
        for r in cands {
            if r >= seg.lambda_lo - slack && r <= seg.lambda_hi + slack {
                let r = r.clamp(seg.lambda_lo, seg.lambda_hi);
                if roots
                    .last()
                    .is_none_or(|last| (last.lambda - r).abs() > slack)
                {
                    roots.push(PathRoot {
                        lambda: r,
                        slope: gamma_b_derivative_segment(seg, r),
                    });
                }
            }
        }
    }
    roots
}

/// The solution used as the estimate when `Gamma_B = C` has several: the
/// largest root at which `Gamma_B` increases with `lambda`, which is the branch
/// matching the support-restricted oracle, else the largest root.
pub fn select_root_b(roots: &[PathRoot]) -> Option<f64> {
    roots
        .iter()
        .find(|r| r.slope > 0.0)
        .or(roots.first())
        .map(|r| r.lambda)
}

/// Exact solution of `Gamma_B(lambda) = C` from the homotopy path.
pub fn tune_path_exact_b(x: &DesignMatrix, y: &[f64], c: f64) -> Result<TunedEstimate> {
    let path = path_for(x, y, PATH_FLOOR)?;
    tune_path_exact_b_on(&path, c)
}

/// [`tune_path_exact_b`] on a precomputed path; see [`select_root_b`] for the
/// choice among several solutions. `history` lists every root found.
pub fn tune_path_exact_b_on(path: &LassoPath<'_>, c: f64) -> Result<TunedEstimate> {
    if !(c > 0.0) {
        return Err(Error::InvalidInput(format!("C must be positive, got {c}")));
    }
    let roots = roots_on_path_b(path, c);
    let Some(lambda) = select_root_b(&roots) else {
        return Err(not_attained(path, c));
    };
    if roots.len() > 1 {
        log::debug!(
            "Gamma_B = {c} has {} solutions on the path: {roots:?}",
            roots.len()
        );
    }
    let sol = eval_path(path, lambda)?;
    let sigma_hat = sigma_hat_b(&sol, path.design().n());
    Ok(TunedEstimate::from_solution(
        sol,
        sigma_hat,
        TuneMethod::PathExact,
        1,
        true,
        roots
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.lambda))
            .collect(),
    ))
}
