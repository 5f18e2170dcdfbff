//! Output type shared by the self-tuning estimators.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lasso::{
    eval_path, homotopy_path_with, solve_lasso_from, LassoPath, LassoSolution,
    OptimalityCertificate, PathConfig, SolverConfig, SparseVector,
};
use crate::model::DesignMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneMethod {
    FixedPoint,
    PathExact,
    Newton,
}

/// Result of tuning `lambda` from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedEstimate {
    pub beta: SparseVector,
    pub lambda_hat: f64,
    pub sigma_hat: f64,
    pub iterations: usize,
    pub converged: bool,
    pub method: TuneMethod,
    /// `(iteration, lambda)` pairs visited by the iteration.
    pub history: Vec<(usize, f64)>,
    pub active_set: Vec<usize>,
    pub signs: Vec<i8>,
    pub residual_norm_sq: f64,
    pub kkt: OptimalityCertificate,
}

impl TunedEstimate {
    pub(crate) fn from_solution(
        sol: LassoSolution,
        sigma_hat: f64,
        method: TuneMethod,
        iterations: usize,
        converged: bool,
        history: Vec<(usize, f64)>,
    ) -> Self {
        Self {
            residual_norm_sq: sol.residual_norm_sq(),
            beta: sol.beta,
            lambda_hat: sol.lambda,
            sigma_hat,
            iterations,
            converged,
            method,
            history,
            active_set: sol.active_set,
            signs: sol.signs,
            kkt: sol.kkt,
        }
    }

    pub fn l1_norm(&self) -> f64 {
        self.beta.l1_norm()
    }
}

/// How the inner LASSO problems are solved by the iterative tuners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Read solutions off the exact homotopy path (computed once).
    Path,
    /// Warm-started coordinate descent at every iterate.
    CoordinateDescent(SolverConfig),
}

/// Default lower end of the path computed by the tuners, relative to `tau`.
pub const PATH_FLOOR: f64 = 1e-6;

/// Solves inner LASSO problems for one `(X, y)`, caching what it can.
pub(crate) enum Inner<'a> {
    Path(LassoPath<'a>),
    Descent {
        x: &'a DesignMatrix,
        y: Vec<f64>,
        cfg: SolverConfig,
        warm: Option<Vec<f64>>,
    },
}

impl<'a> Inner<'a> {
    pub fn new(x: &'a DesignMatrix, y: &[f64], backend: Backend, path_floor: f64) -> Result<Self> {
        Ok(match backend {
            Backend::Path => {
                let tau = crate::lasso::tau_threshold(x, y);
                let floor = (path_floor * tau).max(f64::MIN_POSITIVE);
                Inner::Path(homotopy_path_with(x, y, floor, &PathConfig::default())?)
            }
            Backend::CoordinateDescent(cfg) => Inner::Descent {
                x,
                y: y.to_vec(),
                cfg,
                warm: None,
            },
        })
    }

    pub fn solve(&mut self, lambda: f64) -> Result<LassoSolution> {
        match self {
            Inner::Path(path) => eval_path(path, lambda),
            Inner::Descent { x, y, cfg, warm } => {
                let sol = solve_lasso_from(x, y, lambda, cfg, warm.as_deref())?;
                *warm = Some(sol.beta.to_dense());
                Ok(sol)
            }
        }
    }
}
