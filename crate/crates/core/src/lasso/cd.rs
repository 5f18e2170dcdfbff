//! Cyclic coordinate descent with soft-thresholding.

use super::{check_dims, LassoSolution, SolverConfig};
use crate::error::{Error, Result};
use crate::model::{axpy, dot, DesignMatrix};

#[inline]
fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Solves the LASSO at `lambda` starting from zero.
pub fn solve_lasso(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<LassoSolution> {
    solve_lasso_from(x, y, lambda, cfg, None)
}

/// Solves the LASSO at `lambda`, warm-started from `init` when given.
pub fn solve_lasso_from(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    cfg: &SolverConfig,
    init: Option<&[f64]>,
) -> Result<LassoSolution> {
    run(x, y, lambda, cfg, init, None)
}

/// Like [`solve_lasso`], also returning the objective after every sweep.
pub fn solve_lasso_traced(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<(LassoSolution, Vec<f64>)> {
    let mut trace = Vec::new();
    let sol = run(x, y, lambda, cfg, None, Some(&mut trace))?;
    Ok((sol, trace))
}

fn run(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    cfg: &SolverConfig,
    init: Option<&[f64]>,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<LassoSolution> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    check_dims(x, y)?;
    let p = x.p();
    let mut beta = match init {
        Some(b) if b.len() == p => b.to_vec(),
        Some(b) => {
            return Err(Error::DimensionMismatch(format!(
                "warm start has length {}, expected {p}",
                b.len()
            )))
        }
        None => vec![0.0; p],
    };
    let mut r = super::residual(x, y, &beta);
    let mut last_change = f64::INFINITY;

    for sweep in 0..cfg.max_sweeps {
        let mut max_change = 0.0f64;
        for j in 0..p {
            let col = x.column(j);
            let old = beta[j];
            // columns have unit norm, so the coordinate minimizer needs no rescaling
            let new = soft_threshold(old + dot(col, &r), lambda);
            if new != old {
                axpy(old - new, col, &mut r);
                beta[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            let l1: f64 = beta.iter().map(|b| b.abs()).sum();
            t.push(0.5 * dot(&r, &r) + lambda * l1);
        }
        last_change = max_change;
        if max_change < cfg.tol {
            let sol = LassoSolution::from_dense(x, y, lambda, &beta, cfg.kkt_tol);
            if sol.kkt.is_valid() {
                log::trace!("coordinate descent converged after {} sweeps", sweep + 1);
                return Ok(sol);
            }
            // residual drift: resynchronise before continuing
            r = sol.residual;
        }
    }
    Err(Error::MaxSweepsExceeded {
        sweeps: cfg.max_sweeps,
        max_change: last_change,
        best: Box::new(LassoSolution::from_dense(x, y, lambda, &beta, cfg.kkt_tol)),
    })
}
