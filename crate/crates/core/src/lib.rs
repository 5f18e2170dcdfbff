//! Sparse linear regression when the noise level is unknown.
//!
//! The crate solves the LASSO problem
//! `min_b 1/2 ||y - X b||^2 + lambda ||b||_1` by coordinate descent and by an
//! exact homotopy path, and selects `lambda` from the data with two self-tuning
//! rules:
//!
//! * [`strategy_a`]: `lambda^2 = C_var * ||y - X b_lambda||^2 / n * log p`,
//!   i.e. the penalty is scaled by the empirical residual variance;
//! * [`strategy_b`]: `lambda * ||b_lambda||_1 = C * ||y - X b_lambda||^2`,
//!   a trade-off between penalty and fidelity.
//!
//! Supporting modules compute the theoretical constants ([`theory`]), the
//! closed-form oracle estimators and deterministic recovery conditions
//! ([`oracle`]), and a seeded Monte Carlo harness ([`experiments`]).

pub mod error;
pub mod experiments;
pub mod lasso;
mod linalg;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod strategy_a;
pub mod strategy_b;
pub mod theory;
pub mod tuned;

pub use error::{Error, Result};
pub use lasso::{
    check_generic_condition_local, check_optimality, eval_path, homotopy_path, solve_lasso,
    tau_threshold, LassoPath, LassoSolution, OptimalityCertificate, PathConfig, Segment,
    SolverConfig, SparseVector,
};
pub use model::{DesignMatrix, GroundTruth, Observation};
pub use tuned::{TuneMethod, TunedEstimate};
