//! The LASSO problem `min_b 1/2 ||y - X b||^2 + lambda ||b||_1`.
//!
//! Two independent solvers are provided: cyclic coordinate descent for a
//! single `lambda` ([`solve_lasso`]) and the exact homotopy path
//! ([`homotopy_path`]), which represents `lambda -> b_lambda` as a
//! piecewise-affine map. Every returned solution carries an
//! [`OptimalityCertificate`] built from the subgradient conditions.

mod cd;
mod path;

pub use cd::{solve_lasso, solve_lasso_from, solve_lasso_traced};
pub use path::{eval_path, homotopy_path, homotopy_path_with, LassoPath, PathConfig, Segment};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{chol_solve, factor};
use crate::model::{dot, DesignMatrix};

/// Stopping rules for coordinate descent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Maximum absolute coefficient change in a sweep.
    pub tol: f64,
    /// Tolerance of the optimality certificate.
    pub kkt_tol: f64,
    /// Two path events closer than `bp_tol * lambda` are treated as a tie.
    pub bp_tol: f64,
    pub max_sweeps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            kkt_tol: 1e-7,
            bp_tol: 1e-10,
            max_sweeps: 100_000,
        }
    }
}

/// Coefficient vector stored as sorted `(index, value)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .unzip();
        Self {
            dim: dense.len(),
            indices,
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (&j, &v) in self.indices.iter().zip(&self.values) {
            out[j] = v;
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn get(&self, j: usize) -> f64 {
        match self.indices.binary_search(&j) {
            Ok(k) => self.values[k],
            Err(_) => 0.0,
        }
    }
}

/// Numerical check of the subgradient optimality conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalityCertificate {
    /// `max_{j in A} |X_j^t (y - X b) - lambda sign(b_j)|`.
    pub max_active_violation: f64,
    /// `max_{j not in A} |X_j^t (y - X b)|`.
    pub max_inactive_correlation: f64,
    pub lambda: f64,
    pub tol: f64,
    /// Inactive correlations stay strictly below `lambda - tol` (uniqueness).
    pub strict: bool,
}

impl OptimalityCertificate {
    pub fn is_valid(&self) -> bool {
        self.max_active_violation <= self.tol
            && self.max_inactive_correlation <= self.lambda + self.tol
    }
}

/// Solution of the LASSO problem at one penalty level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoSolution {
    pub beta: SparseVector,
    pub lambda: f64,
    /// Indices of nonzero coefficients, ascending.
    pub active_set: Vec<usize>,
    pub signs: Vec<i8>,
    pub residual: Vec<f64>,
    /// `1/2 ||y - X b||^2 + lambda ||b||_1`.
    pub objective: f64,
    pub kkt: OptimalityCertificate,
}

impl LassoSolution {
    /// Assembles a solution from dense coefficients, recomputing the residual
    /// and the certificate.
    pub fn from_dense(
        x: &DesignMatrix,
        y: &[f64],
        lambda: f64,
        beta: &[f64],
        kkt_tol: f64,
    ) -> Self {
        let residual = residual(x, y, beta);
        let kkt = certificate_from_residual(x, &residual, lambda, beta, kkt_tol);
        let sparse = SparseVector::from_dense(beta);
        let signs = sparse
            .values
            .iter()
            .map(|v| if *v > 0.0 { 1 } else { -1 })
            .collect();
        let objective = 0.5 * dot(&residual, &residual) + lambda * sparse.l1_norm();
        Self {
            active_set: sparse.indices.clone(),
            signs,
            beta: sparse,
            lambda,
            residual,
            objective,
            kkt,
        }
    }

    pub fn residual_norm_sq(&self) -> f64 {
        dot(&self.residual, &self.residual)
    }

    pub fn l1_norm(&self) -> f64 {
        self.beta.l1_norm()
    }
}

pub(crate) fn residual(x: &DesignMatrix, y: &[f64], beta: &[f64]) -> Vec<f64> {
    let fit = x.mul_vec(beta);
    y.iter().zip(&fit).map(|(a, b)| a - b).collect()
}

fn certificate_from_residual(
    x: &DesignMatrix,
    residual: &[f64],
    lambda: f64,
    beta: &[f64],
    tol: f64,
) -> OptimalityCertificate {
    let mut active = 0.0f64;
    let mut inactive = 0.0f64;
    for (j, &b) in beta.iter().enumerate() {
        let c = dot(x.column(j), residual);
        if b != 0.0 {
            active = active.max((c - lambda * b.signum()).abs());
        } else {
            inactive = inactive.max(c.abs());
        }
    }
    OptimalityCertificate {
        max_active_violation: active,
        max_inactive_correlation: inactive,
        lambda,
        tol,
        strict: inactive < lambda - tol,
    }
}

/// Evaluates the subgradient conditions for dense coefficients `beta`.
pub fn check_optimality(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    beta: &[f64],
    tol: f64,
) -> Result<OptimalityCertificate> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    check_dims(x, y)?;
    if beta.len() != x.p() {
        return Err(Error::DimensionMismatch(format!(
            "beta has length {}, design has p = {}",
            beta.len(),
            x.p()
        )));
    }
    let r = residual(x, y, beta);
    Ok(certificate_from_residual(x, &r, lambda, beta, tol))
}

/// `||X^t y||_inf`, the smallest penalty for which the solution is zero.
pub fn tau_threshold(x: &DesignMatrix, y: &[f64]) -> f64 {
    let tau = x.tr_mul_vec(y).iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if tau == 0.0 {
        log::warn!("tau_threshold: X^t y vanishes, the solution is zero for every lambda");
    }
    tau
}

/// `max_{j not in I} |<X_j, X_I (X_I^t X_I)^{-1} delta>|` for one support/sign pair.
pub fn generic_condition_value(x: &DesignMatrix, active: &[usize], signs: &[f64]) -> Result<f64> {
    if active.len() != signs.len() {
        return Err(Error::DimensionMismatch(
            "active set and sign vector lengths differ".into(),
        ));
    }
    if active.is_empty() {
        return Ok(0.0);
    }
    let chol = factor(x, active)?;
    let coef = chol_solve(&chol, signs);
    let mut v = vec![0.0; x.n()];
    for (&j, &c) in active.iter().zip(&coef) {
        crate::model::axpy(c, x.column(j), &mut v);
    }
    let mut worst = 0.0f64;
    for j in 0..x.p() {
        if !active.contains(&j) {
            worst = worst.max(dot(x.column(j), &v).abs());
        }
    }
    Ok(worst)
}

/// True when the Generic Condition inequality holds for the given `(I, delta)`.
pub fn check_generic_condition_local(
    x: &DesignMatrix,
    active: &[usize],
    signs: &[f64],
) -> Result<bool> {
    Ok(generic_condition_value(x, active, signs)? < 1.0)
}

pub(crate) fn check_dims(x: &DesignMatrix, y: &[f64]) -> Result<()> {
    if y.len() != x.n() {
        return Err(Error::DimensionMismatch(format!(
            "y has length {}, design has n = {}",
            y.len(),
            x.n()
        )));
    }
    Ok(())
}
