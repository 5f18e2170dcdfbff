//! Closed-form oracle estimators that know the true support and signs, and
//! the deterministic conditions under which the tuned LASSO coincides with them.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{chol_solve, factor, gram};
use crate::model::{dot, DesignMatrix};
use crate::theory::{kappa, Check, TheoryParams};

/// Support-restricted quantities shared by both oracles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleDiagnostics {
    /// `||P_perp v||^2` for the vector the oracle was given (`z` or `y`).
    pub resid_perp_sq: f64,
    /// `q = s^t (X_T^t X_T)^{-1} s = ||X_T (X_T^t X_T)^{-1} s||^2`.
    pub q: f64,
    /// `s^t (X_T^t X_T)^{-1} X_T^t y`; zero when only `z` was supplied.
    pub sign_dot_ls: f64,
    /// Discriminant of the penalty/fidelity quadratic, when computed.
    pub delta: Option<f64>,
}

/// Oracle pair `(beta_tilde, lambda_tilde)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Dense, zero off the support.
    pub beta_tilde: Vec<f64>,
    pub lambda_tilde: f64,
    /// Both roots of the quadratic, smaller first (penalty/fidelity only).
    pub roots: Option<(f64, f64)>,
    pub well_defined: bool,
    pub diagnostics: OracleDiagnostics,
}

fn check_support(x: &DesignMatrix, support: &[usize], signs: &[f64]) -> Result<()> {
    if support.len() != signs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} support indices but {} signs",
            support.len(),
            signs.len()
        )));
    }
    if support.is_empty() {
        return Err(Error::InvalidInput(
            "oracle needs a nonempty support".into(),
        ));
    }
    if let Some(&j) = support.iter().find(|&&j| j >= x.p()) {
        return Err(Error::InvalidInput(format!(
            "support index {j} out of range"
        )));
    }
    Ok(())
}

fn check_len(v: &[f64], n: usize, what: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{what} has length {}, expected {n}",
            v.len()
        )));
    }
    Ok(())
}

/// Pieces of the restricted least-squares fit of `v` on `X_T`.
struct Restricted {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    /// `(X_T^t X_T)^{-1} s`
    g_inv_s: Vec<f64>,
    q: f64,
}

impl Restricted {
    fn new(x: &DesignMatrix, support: &[usize], signs: &[f64]) -> Result<Self> {
        let chol = factor(x, support)?;
        let g_inv_s = chol_solve(&chol, signs);
        let q = dot(signs, &g_inv_s);
        Ok(Self { chol, g_inv_s, q })
    }

    /// `(X_T^t X_T)^{-1} X_T^t v`
    fn ls(&self, x: &DesignMatrix, support: &[usize], v: &[f64]) -> Vec<f64> {
        let xtv: Vec<f64> = support.iter().map(|&j| dot(x.column(j), v)).collect();
        chol_solve(&self.chol, &xtv)
    }

    /// `P_perp v`
    fn perp(&self, x: &DesignMatrix, support: &[usize], v: &[f64]) -> Vec<f64> {
        let coef = self.ls(x, support, v);
        let mut out = v.to_vec();
        for (&j, &c) in support.iter().zip(&coef) {
            for (o, xi) in out.iter_mut().zip(x.column(j)) {
                *o -= c * xi;
            }
        }
        out
    }
}

/// `beta_tilde_T = (X_T^t X_T)^{-1} (X_T^t y - lambda s)`, zero off `T`.
pub fn oracle_beta(
    x: &DesignMatrix,
    support: &[usize],
    signs: &[f64],
    y: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    check_support(x, support, signs)?;
    check_len(y, x.n(), "y")?;
    let chol = factor(x, support)?;
    let rhs: Vec<f64> = support
        .iter()
        .zip(signs)
        .map(|(&j, &s)| dot(x.column(j), y) - lambda * s)
        .collect();
    let coef = chol_solve(&chol, &rhs);
    let mut beta = vec![0.0; x.p()];
    for (&j, c) in support.iter().zip(coef) {
        beta[j] = c;
    }
    Ok(beta)
}

/// Oracle penalty of the variance-proportional strategy,
/// `lambda^2 = ||P_perp z||^2 / (n / (C_var log p) - q)`.
///
/// `well_defined` is false (and `lambda_tilde` NaN) when the denominator is
/// not positive. `beta_tilde` is computed from `y`.
pub fn oracle_lambda_a(
    x: &DesignMatrix,
    support: &[usize],
    signs: &[f64],
    y: &[f64],
    z: &[f64],
    cvar: f64,
) -> Result<OracleResult> {
    check_support(x, support, signs)?;
    check_len(z, x.n(), "z")?;
    if !(cvar > 0.0) {
        return Err(Error::InvalidInput(format!(
            "C_var must be positive, got {cvar}"
        )));
    }
    let restricted = Restricted::new(x, support, signs)?;
    let pz = restricted.perp(x, support, z);
    let w = dot(&pz, &pz);
    let q = restricted.q;
    let denom = x.n() as f64 / (cvar * (x.p() as f64).ln()) - q;
    let well_defined = denom > 0.0;
    let lambda = if well_defined {
        (w / denom).sqrt()
    } else {
        f64::NAN
    };
    let beta_tilde = if well_defined {
        oracle_beta(x, support, signs, y, lambda)?
    } else {
        vec![0.0; x.p()]
    };
    let ls = restricted.ls(x, support, y);
    Ok(OracleResult {
        beta_tilde,
        lambda_tilde: lambda,
        roots: None,
        well_defined,
        diagnostics: OracleDiagnostics {
            resid_perp_sq: w,
            q,
            sign_dot_ls: dot(signs, &ls),
            delta: None,
        },
    })
}

/// Oracle penalty of the penalty/fidelity strategy, the roots of
/// `(1/2 + C) q lambda^2 - C u lambda + 1/2 ||P_perp y||^2 = 0`.
///
/// Here `C` weighs `1/2 ||y - X b||^2 = C lambda ||b||_1`, so it corresponds to
/// the tuner constant [`strategy_b_constant`]`(C)`. The smaller root is the
/// oracle value; `well_defined` is `Delta > 0`.
pub fn oracle_lambda_b(
    x: &DesignMatrix,
    support: &[usize],
    signs: &[f64],
    y: &[f64],
    c: f64,
) -> Result<OracleResult> {
    check_support(x, support, signs)?;
    check_len(y, x.n(), "y")?;
    if !(c > 0.0) {
        return Err(Error::InvalidInput(format!("C must be positive, got {c}")));
    }
    let restricted = Restricted::new(x, support, signs)?;
    let py = restricted.perp(x, support, y);
    let w = dot(&py, &py);
    let q = restricted.q;
    let u = dot(signs, &restricted.ls(x, support, y));
    let delta = (c * u).powi(2) - (1.0 + 2.0 * c) * q * w;
    let well_defined = delta > 0.0;
    let (roots, lambda) = if well_defined {
        let sq = delta.sqrt();
        let denom = (1.0 + 2.0 * c) * q;
        // the product of the roots is w / ((1 + 2C) q); avoids cancellation
        let (small, large) = if c * u > 0.0 {
            let large = (c * u + sq) / denom;
            (w / ((1.0 + 2.0 * c) * q) / large, large)
        } else {
            ((c * u - sq) / denom, (c * u + sq) / denom)
        };
        (Some((small, large)), small)
    } else {
        (None, f64::NAN)
    };
    let beta_tilde = if well_defined {
        oracle_beta(x, support, signs, y, lambda)?
    } else {
        vec![0.0; x.p()]
    };
    Ok(OracleResult {
        beta_tilde,
        lambda_tilde: lambda,
        roots,
        well_defined,
        diagnostics: OracleDiagnostics {
            resid_perp_sq: w,
            q,
            sign_dot_ls: u,
            delta: Some(delta),
        },
    })
}

/// Tuner constant matching the oracle quadratic's `C`: `1 / (2 C)`.
pub fn strategy_b_constant(oracle_c: f64) -> f64 {
    1.0 / (2.0 * oracle_c)
}

/// The five Candes-Plan conditions evaluated on one instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpReport {
    /// `||(X_T^t X_T)^{-1} X_T^t z||_inf <= kappa sigma sqrt(log p)`
    pub noise_on_support: Check,
    /// `||(X_T^t X_T)^{-1} s||_inf <= 3`
    pub sign_inverse: Check,
    /// `||X_{T^c}^t X_T (X_T^t X_T)^{-1} s||_inf <= 1/4`
    pub irrepresentable: Check,
    /// `||X_{T^c}^t P_perp z||_inf <= kappa sigma sqrt(log p)`
    pub noise_off_support: Check,
    /// `||X_T^t X_T - I|| <= r`
    pub isometry: Check,
}

impl CpReport {
    pub fn all(&self) -> bool {
        self.as_array().iter().all(|c| c.ok)
    }

    pub fn as_array(&self) -> [Check; 5] {
        [
            self.noise_on_support,
            self.sign_inverse,
            self.irrepresentable,
            self.noise_off_support,
            self.isometry,
        ]
    }
}

fn inf_norm(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, a| m.max(a.abs()))
}

/// Evaluates the five conditions exactly; margins are `bound - value`.
pub fn check_cp_conditions(
    x: &DesignMatrix,
    support: &[usize],
    signs: &[f64],
    z: &[f64],
    sigma: f64,
    params: &TheoryParams,
) -> Result<CpReport> {
    check_support(x, support, signs)?;
    check_len(z, x.n(), "z")?;
    let restricted = Restricted::new(x, support, signs)?;
    let noise_bound = kappa(params.alpha) * sigma * (x.p() as f64).ln().sqrt();

    let mut in_t = vec![false; x.p()];
    for &j in support {
        in_t[j] = true;
    }
    let off: Vec<usize> = (0..x.p()).filter(|&j| !in_t[j]).collect();

    let cond_i = inf_norm(restricted.ls(x, support, z));
    let cond_ii = inf_norm(restricted.g_inv_s.iter().copied());

    let mut v = vec![0.0; x.n()];
    for (&j, &c) in support.iter().zip(&restricted.g_inv_s) {
        for (o, xi) in v.iter_mut().zip(x.column(j)) {
            *o += c * xi;
        }
    }
    let cond_iii = inf_norm(off.iter().map(|&j| dot(x.column(j), &v)));
    let pz = restricted.perp(x, support, z);
    let cond_iv = inf_norm(off.iter().map(|&j| dot(x.column(j), &pz)));

    let cond_v = isometry_deviation(x, support)?;

    Ok(CpReport {
        noise_on_support: Check::at_most(cond_i, noise_bound),
        sign_inverse: Check::at_most(cond_ii, 3.0),
        irrepresentable: Check::at_most(cond_iii, 0.25),
        noise_off_support: Check::at_most(cond_iv, noise_bound),
        isometry: Check::at_most(cond_v, params.r),
    })
}

/// Spectral norm of `X_T^t X_T - I`.
pub fn isometry_deviation(x: &DesignMatrix, support: &[usize]) -> Result<f64> {
    if let Some(&j) = support.iter().find(|&&j| j >= x.p()) {
        return Err(Error::InvalidInput(format!(
            "support index {j} out of range for p = {}",
            x.p()
        )));
    }
    if support.is_empty() {
        return Ok(0.0);
    }
    let g = gram(x, support) - DMatrix::identity(support.len(), support.len());
    Ok(inf_norm(SymmetricEigen::new(g).eigenvalues.iter().copied()))
}

/// `1 - max_{j not in T} |X_j^t (y - X beta)| / lambda`; positive means the
/// off-support subgradient condition holds strictly.
pub fn dual_feasibility_margin(
    x: &DesignMatrix,
    support: &[usize],
    beta: &[f64],
    y: &[f64],
    lambda: f64,
) -> Result<f64> {
    check_len(y, x.n(), "y")?;
    check_len(beta, x.p(), "beta")?;
    let fit = x.mul_vec(beta);
    let r: Vec<f64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
    let mut in_t = vec![false; x.p()];
    for &j in support {
        in_t[j] = true;
    }
    let worst = inf_norm(
        (0..x.p())
            .filter(|&j| !in_t[j])
            .map(|j| dot(x.column(j), &r)),
    );
    Ok(1.0 - worst / lambda)
}

/// Whether `beta` is nonzero exactly on `support` with the given signs.
pub fn sign_consistent(beta: &[f64], support: &[usize], signs: &[f64]) -> bool {
    let on: usize = beta.iter().filter(|b| **b != 0.0).count();
    on == support.len()
        && support
            .iter()
            .zip(signs)
            .all(|(&j, &s)| beta[j] != 0.0 && beta[j].signum() == s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn embedded_identity(n: usize, p: usize) -> DesignMatrix {
        let mut m = DMatrix::zeros(n, p);
        for j in 0..p {
            m[(j % n, j)] = 1.0;
        }
        DesignMatrix::new(m).unwrap()
    }

    #[test]
    fn orthonormal_beta_is_shifted_projection() {
        let x = embedded_identity(6, 6);
        let y = [3.0, -2.0, 0.5, 0.1, 0.0, 1.0];
        let beta = oracle_beta(&x, &[0, 1], &[1.0, -1.0], &y, 0.5).unwrap();
        assert_eq!(beta, vec![2.5, -1.5, 0.0, 0.0, 0.0, 0.0]);
        let ls = oracle_beta(&x, &[0, 1], &[1.0, -1.0], &y, 0.0).unwrap();
        assert_eq!(&ls[..2], &[3.0, -2.0]);
    }

    #[test]
    fn lambda_a_orthonormal_denominator() {
        let x = embedded_identity(50, 60);
        let mut z = vec![0.0; 50];
        z[10] = 2.0;
        let y = z.clone();
        let res = oracle_lambda_a(&x, &[0, 1, 2], &[1.0, 1.0, -1.0], &y, &z, 1.0).unwrap();
        let denom = 50.0 / 60f64.ln() - 3.0;
        assert_relative_eq!(res.diagnostics.q, 3.0, max_relative = 1e-14);
        assert_relative_eq!(res.lambda_tilde, (4.0 / denom).sqrt(), max_relative = 1e-12);
        let zero = oracle_lambda_a(&x, &[0], &[1.0], &y, &vec![0.0; 50], 1.0).unwrap();
        assert_eq!(zero.lambda_tilde, 0.0);
        let bad = oracle_lambda_a(&x, &[0, 1, 2], &[1.0, 1.0, -1.0], &y, &z, 100.0).unwrap();
        assert!(!bad.well_defined);
    }

    #[test]
    fn lambda_b_roots_solve_quadratic() {
        let x = DesignMatrix::gaussian(30, 50, 4).unwrap();
        let mut beta = vec![0.0; 50];
        beta[3] = 4.0;
        beta[17] = -5.0;
        let mut y = x.mul_vec(&beta);
        for (i, v) in y.iter_mut().enumerate() {
            *v += 0.3 * ((i as f64) * 1.7).sin();
        }
        let c = 0.7;
        let res = oracle_lambda_b(&x, &[3, 17], &[1.0, -1.0], &y, c).unwrap();
        let d = res.diagnostics;
        let (lo, hi) = res.roots.unwrap();
        assert!(lo < hi);
        for r in [lo, hi] {
            let value = (0.5 + c) * d.q * r * r - c * d.sign_dot_ls * r + 0.5 * d.resid_perp_sq;
            let scale = (0.5 + c) * d.q * r * r + 0.5 * d.resid_perp_sq;
            assert!(value.abs() <= 1e-9 * scale);
        }
        assert_eq!(res.lambda_tilde, lo);
    }

    #[test]
    fn lambda_b_noiseless_roots() {
        let x = DesignMatrix::gaussian(30, 50, 5).unwrap();
        let mut beta = vec![0.0; 50];
        beta[1] = 2.0;
        beta[8] = 3.0;
        let y = x.mul_vec(&beta);
        let c = 1.0;
        let res = oracle_lambda_b(&x, &[1, 8], &[1.0, 1.0], &y, c).unwrap();
        let d = res.diagnostics;
        let (lo, hi) = res.roots.unwrap();
        assert!(lo.abs() < 1e-9);
        assert_relative_eq!(
            hi,
            c * d.sign_dot_ls / ((0.5 + c) * d.q),
            max_relative = 1e-9
        );
    }

    #[test]
    fn cp_orthonormal_margins() {
        let x = embedded_identity(40, 40);
        let params = TheoryParams::new(1.5, 0.5, 1.0).unwrap();
        let z = vec![0.0; 40];
        let rep = check_cp_conditions(&x, &[0, 5], &[1.0, -1.0], &z, 1.0, &params).unwrap();
        let bound = kappa(1.5) * 40f64.ln().sqrt();
        assert_relative_eq!(rep.noise_on_support.margin, bound);
        assert_relative_eq!(rep.noise_off_support.margin, bound);
        assert_relative_eq!(rep.sign_inverse.margin, 2.0);
        assert_relative_eq!(rep.isometry.margin, 0.5);
        assert!(rep.all());
    }

    #[test]
    fn errors() {
        let x = embedded_identity(5, 5);
        assert!(oracle_beta(&x, &[0], &[1.0, 1.0], &[0.0; 5], 0.1).is_err());
        assert!(oracle_beta(&x, &[], &[], &[0.0; 5], 0.1).is_err());
        assert!(oracle_beta(&x, &[0], &[1.0], &[0.0; 4], 0.1).is_err());
        let dup =
            DesignMatrix::new(DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 1.0, 0.0])).unwrap();
        assert!(matches!(
            oracle_beta(&dup, &[0, 1], &[1.0, 1.0], &[1.0, 0.0], 0.1),
            Err(Error::SingularSubmatrix(_))
        ));
    }

    #[test]
    fn sign_consistency() {
        assert!(sign_consistent(&[0.0, 2.0, -1.0], &[1, 2], &[1.0, -1.0]));
        assert!(!sign_consistent(&[0.1, 2.0, -1.0], &[1, 2], &[1.0, -1.0]));
        assert!(!sign_consistent(&[0.0, 2.0, 1.0], &[1, 2], &[1.0, -1.0]));
    }
}
