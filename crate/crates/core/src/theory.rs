//! Closed-form constants and bounds of the exact-recovery guarantees, and an
//! instance-level report of which hypotheses hold.

use std::collections::BTreeMap;
use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DesignMatrix, GroundTruth};
use crate::strategy_a::cvar_interval_from;

/// Which pair of coherence/sparsity constants to use.
///
/// `Standard` is `C_spar = r^2 / ((1+a) e^2)`, `C_mu = r / (1+a)`. The
/// `Invertibility` set is the tighter pair used for the invertibility of
/// `X_T^t X_T`: `C_mu / 2` and `C_spar / 4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantSet {
    #[default]
    Standard,
    Invertibility,
}

/// Parameters shared by every bound: rate exponent `alpha`, isometry slack `r`
/// and the trade-off constant `c` of the penalty/fidelity strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub alpha: f64,
    pub r: f64,
    pub c: f64,
    #[serde(default)]
    pub constant_set: ConstantSet,
}

impl TheoryParams {
    pub fn new(alpha: f64, r: f64, c: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if !(r > 0.0 && r <= 0.5) {
            return Err(Error::InvalidInput(format!(
                "r must lie in (0, 1/2], got {r}"
            )));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidInput(format!("C must be positive, got {c}")));
        }
        Ok(Self {
            alpha,
            r,
            c,
            constant_set: ConstantSet::Standard,
        })
    }

    pub fn with_constant_set(mut self, set: ConstantSet) -> Self {
        self.constant_set = set;
        self
    }
}

/// `kappa = 4 sqrt(1 + alpha)`.
pub fn kappa(alpha: f64) -> f64 {
    4.0 * (1.0 + alpha).sqrt()
}

/// `(C_spar, C_mu)` for the selected constant set.
pub fn constants(params: &TheoryParams) -> (f64, f64) {
    let (a, r) = (params.alpha, params.r);
    let c_spar = r * r / ((1.0 + a) * E * E);
    let c_mu = r / (1.0 + a);
    match params.constant_set {
        ConstantSet::Standard => (c_spar, c_mu),
        ConstantSet::Invertibility => (c_spar / 4.0, c_mu / 2.0),
    }
}

/// `l_alpha(x) = x exp(-4 alpha / x)`.
pub fn ell_alpha(alpha: f64, x: f64) -> f64 {
    x * (-4.0 * alpha / x).exp()
}

/// Right-hand side `10 e (1+r) / (1-r)^2 * kappa^2` defining `C_circ`.
pub fn c_circ_target(params: &TheoryParams) -> f64 {
    let r = params.r;
    10.0 * E * (1.0 + r) / ((1.0 - r) * (1.0 - r)) * kappa(params.alpha).powi(2)
}

/// `C_circ`, the unique root of `l_alpha(x) = 10 e (1+r)/(1-r)^2 kappa^2`.
pub fn c_circ(params: &TheoryParams) -> f64 {
    let alpha = params.alpha;
    let target = c_circ_target(params);
    // l_alpha(x) < x, so the root exceeds the target
    let mut lo = target;
    let mut hi = 2.0 * target;
    while ell_alpha(alpha, hi) < target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ell_alpha(alpha, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `c_circ = (6 kappa)^2 e / (1 - r)`.
pub fn c_small_circ(params: &TheoryParams) -> f64 {
    (6.0 * kappa(params.alpha)).powi(2) * E / (1.0 - params.r)
}

/// Bounds of the variance-proportional strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsA {
    /// Largest admissible sparsity.
    pub s0: f64,
    /// Smallest admissible sample size for the given `s`.
    pub n_min: f64,
    /// Lower bound on `min |beta_j| / sigma`.
    pub h: f64,
}

/// [`BoundsA`] for a design, computing `||X||`.
pub fn bounds_a(x: &DesignMatrix, s: usize, params: &TheoryParams) -> Result<BoundsA> {
    let norm = x.opnorm()?;
    Ok(bounds_a_from(norm * norm, x.n(), x.p(), s, params))
}

/// [`BoundsA`] from a known `||X||^2`.
pub fn bounds_a_from(
    opnorm_sq: f64,
    n: usize,
    p: usize,
    s: usize,
    params: &TheoryParams,
) -> BoundsA {
    let (c_spar, _) = constants(params);
    let log_p = (p as f64).ln();
    let r = params.r;
    let s0 = p as f64 / log_p * c_spar / opnorm_sq;
    let n_min = s as f64 * (c_circ(params) * log_p + 1.0);
    let h = 4.0 * ((n as f64).sqrt() + (2.0 * params.alpha * log_p).sqrt()) / s0.sqrt() * (1.0 - r)
        / (1.0 + r).sqrt();
    BoundsA { s0, n_min, h }
}

/// Bounds of the penalty/fidelity strategy, for the constant `params.c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsB {
    /// Lower bound on `min |beta_j| / sigma`.
    pub l: f64,
    /// Upper bound on `||beta||_1 / sigma`.
    pub m: f64,
    /// Smallest admissible sample size.
    pub n_min: f64,
}

/// [`BoundsB`]; requires `n > s >= 1`.
pub fn bounds_b(n: usize, p: usize, s: usize, params: &TheoryParams) -> Result<BoundsB> {
    if s == 0 || n <= s {
        return Err(Error::InvalidInput(format!(
            "bounds require n > s >= 1, got n = {n}, s = {s}"
        )));
    }
    let (a, r, c) = (params.alpha, params.r, params.c);
    let log_p = (p as f64).ln();
    let (nf, sf) = (n as f64, s as f64);
    let ns = nf - sf;
    let tail = (2.0 * a * log_p).sqrt();
    let first =
        2.0 * (1.0 + 2.0 * c).sqrt() / (c * (1.0 - r).sqrt()) * (ns.sqrt() + tail) / sf.sqrt();
    let second = 2.0 * (sf.sqrt() + tail) / ((1.0 - r).sqrt() * sf.sqrt());
    let l = first.max(second);
    // (sqrt(pi (n-s)) / p^a)^(4/(n-s)) through logs
    let power = (4.0 / ns * (0.5 * (PI * ns).ln() - a * log_p)).exp();
    let m = ns / log_p.sqrt() / (3.0 * kappa(a) * c) * power;
    let n_min = c_small_circ(params) * (1.0 + 2.0 * c) * sf * log_p + sf;
    Ok(BoundsB { l, m, n_min })
}

/// Tail bounds for a chi variable with `nu` degrees of freedom:
/// `P(chi >= sqrt(nu) + sqrt(2t)) <= exp(-t)` and
/// `P(chi <= sqrt(u nu)) <= 2 / sqrt(pi nu) * (u e / 2)^(nu / 4)`.
///
/// Valid for `nu >= 1`, `t >= 0` and `u` in `(0, 2/e)`.
pub fn chi_tails(nu: f64, t: f64, u: f64) -> (f64, f64) {
    let upper = (-t).exp();
    let lower = 2.0 / (PI * nu).sqrt() * (u * E / 2.0).powf(nu / 4.0);
    (upper, lower)
}

/// Which estimator's hypotheses to check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    A,
    B,
}

/// A hypothesis and its slack; `ok` is exactly `margin >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub ok: bool,
    pub margin: f64,
}

impl Check {
    /// Margin of `value <= bound`.
    pub fn at_most(value: f64, bound: f64) -> Self {
        Self::from_margin(bound - value)
    }

    /// Margin of `value >= bound`.
    pub fn at_least(value: f64, bound: f64) -> Self {
        Self::from_margin(value - bound)
    }

    pub fn from_margin(margin: f64) -> Self {
        Self {
            ok: margin >= 0.0,
            margin,
        }
    }

    fn vacuous() -> Self {
        Self::from_margin(f64::INFINITY)
    }
}

/// Which hypotheses of the recovery guarantee a concrete instance satisfies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub strategy: Strategy,
    pub coherence_ok: Check,
    pub sparsity_ok: Check,
    pub sample_size_ok: Check,
    pub beta_lower_ok: Check,
    /// Penalty/fidelity strategy only.
    pub beta_upper_ok: Option<Check>,
    /// Variance-proportional strategy only.
    pub cvar_in_interval: Option<Check>,
    pub constants: BTreeMap<String, f64>,
}

impl AssumptionReport {
    pub fn all_ok(&self) -> bool {
        [
            Some(self.coherence_ok),
            Some(self.sparsity_ok),
            Some(self.sample_size_ok),
            Some(self.beta_lower_ok),
            self.beta_upper_ok,
            self.cvar_in_interval,
        ]
        .into_iter()
        .flatten()
        .all(|c| c.ok)
    }
}

/// Evaluates every hypothesis on `(X, beta, sigma)`. `tuning` is `C_var` for
/// strategy A and the trade-off constant `C` for strategy B (overriding
/// `params.c`). Never fails on violated hypotheses; they are only reported.
pub fn check_assumptions(
    x: &DesignMatrix,
    truth: &GroundTruth,
    strategy: Strategy,
    params: &TheoryParams,
    tuning: f64,
) -> Result<AssumptionReport> {
    if truth.beta.len() != x.p() {
        return Err(Error::DimensionMismatch(format!(
            "beta has length {}, design has {} columns",
            truth.beta.len(),
            x.p()
        )));
    }
    let (n, p, s) = (x.n(), x.p(), truth.sparsity());
    let log_p = (p as f64).ln();
    let norm = x.opnorm()?;
    let opnorm_sq = norm * norm;
    let params = match strategy {
        Strategy::A => *params,
        Strategy::B => TheoryParams {
            c: tuning,
            ..*params
        },
    };
    let (c_spar, c_mu) = constants(&params);
    let a = bounds_a_from(opnorm_sq, n, p, s, &params);

    let mut consts = BTreeMap::new();
    consts.insert("kappa".to_string(), kappa(params.alpha));
    consts.insert("c_spar".to_string(), c_spar);
    consts.insert("c_mu".to_string(), c_mu);
    consts.insert("c_circ".to_string(), c_circ(&params));
    consts.insert("c_small_circ".to_string(), c_small_circ(&params));
    consts.insert("s0".to_string(), a.s0);
    consts.insert("h".to_string(), a.h);
    consts.insert("opnorm_sq".to_string(), opnorm_sq);

    let coherence = x.coherence();
    consts.insert("coherence".to_string(), coherence);
    let coherence_ok = Check::at_most(coherence, c_mu / log_p);
    let sparsity_ok = Check::at_most(s as f64, a.s0);
    let min_ratio = truth.min_abs() / truth.sigma;

    let report = match strategy {
        Strategy::A => {
            let (lo, hi) = cvar_interval_from(n, p, opnorm_sq, &params);
            consts.insert("n_min".to_string(), a.n_min);
            consts.insert("cvar_lo".to_string(), lo);
            consts.insert("cvar_hi".to_string(), hi);
            AssumptionReport {
                strategy,
                coherence_ok,
                sparsity_ok,
                sample_size_ok: Check::at_least(n as f64, a.n_min),
                beta_lower_ok: if s == 0 {
                    Check::vacuous()
                } else {
                    Check::at_least(min_ratio, a.h)
                },
                beta_upper_ok: None,
                cvar_in_interval: Some(Check::from_margin((tuning - lo).min(hi - tuning))),
                constants: consts,
            }
        }
        Strategy::B => {
            let n_min =
                c_small_circ(&params) * (1.0 + 2.0 * params.c) * s as f64 * log_p + s as f64;
            consts.insert("n_min".to_string(), n_min);
            let (lower, upper) = if s == 0 {
                (Check::vacuous(), Check::vacuous())
            } else if n <= s {
                (Check::from_margin(f64::NAN), Check::from_margin(f64::NAN))
            } else {
                let b = bounds_b(n, p, s, &params)?;
                consts.insert("l".to_string(), b.l);
                consts.insert("m".to_string(), b.m);
                (
                    Check::at_least(min_ratio, b.l),
                    Check::at_most(truth.l1_norm() / truth.sigma, b.m),
                )
            };
            AssumptionReport {
                strategy,
                coherence_ok,
                sparsity_ok,
                sample_size_ok: Check::at_least(n as f64, n_min),
                beta_lower_ok: lower,
                beta_upper_ok: Some(upper),
                cvar_in_interval: None,
                constants: consts,
            }
        }
    };
    Ok(report)
}
