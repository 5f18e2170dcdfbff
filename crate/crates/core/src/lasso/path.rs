//! Exact homotopy (LARS-LASSO) path.
//!
//! On every segment the active set `A` and its sign vector `s` are fixed, and
//! `b_A(lambda) = a - lambda * d` with `a = (X_A^t X_A)^{-1} X_A^t y` and
//! `d = (X_A^t X_A)^{-1} s`. Breakpoints are where an inactive correlation
//! reaches `+-lambda` (entry) or an active coefficient crosses zero (exit).

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{check_dims, LassoSolution, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::ActiveFactor;
use crate::model::{axpy, dot, DesignMatrix};

/// Tolerances of the path algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    /// Two events within `bp_tol * lambda` abort with [`Error::DegenerateBreakpoint`].
    pub bp_tol: f64,
    /// Tolerance of the certificates attached by [`eval_path`].
    pub kkt_tol: f64,
    /// Upper bound on the number of breakpoints; defaults to `50 * (n + p)`.
    pub max_events: Option<usize>,
}

impl Default for PathConfig {
    fn default() -> Self {
        SolverConfig::default().into()
    }
}

impl From<SolverConfig> for PathConfig {
    fn from(cfg: SolverConfig) -> Self {
        Self {
            bp_tol: cfg.bp_tol,
            kkt_tol: cfg.kkt_tol,
            max_events: None,
        }
    }
}

/// One maximal interval `[lambda_lo, lambda_hi]` with constant support and signs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lambda_hi: f64,
    pub lambda_lo: f64,
    /// Active columns in entry order.
    pub active: Vec<usize>,
    pub signs: Vec<i8>,
    /// Least-squares coefficients `(X_A^t X_A)^{-1} X_A^t y`.
    pub intercept: Vec<f64>,
    /// Slope `(X_A^t X_A)^{-1} s`; the coefficients are `intercept - lambda * slope`.
    pub slope: Vec<f64>,
    /// `||P_{V_A^perp} y||^2`, the squared least-squares residual on `A`.
    pub resid_perp_sq: f64,
    /// `s^t (X_A^t X_A)^{-1} s`.
    pub sign_quad: f64,
    /// `s^t (X_A^t X_A)^{-1} X_A^t y`.
    pub sign_dot_ls: f64,
}

impl Segment {
    pub fn contains(&self, lambda: f64) -> bool {
        self.lambda_lo <= lambda && lambda <= self.lambda_hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lambda_lo + self.lambda_hi)
    }

    /// Active coefficients at `lambda`, in entry order.
    pub fn coefficients(&self, lambda: f64) -> Vec<f64> {
        self.intercept
            .iter()
            .zip(&self.slope)
            .map(|(a, d)| a - lambda * d)
            .collect()
    }

    /// `||b_lambda||_1 = s^t a - lambda s^t d`.
    pub fn l1_norm(&self, lambda: f64) -> f64 {
        self.sign_dot_ls - lambda * self.sign_quad
    }

    /// `||y - X b_lambda||^2 = ||P_perp y||^2 + lambda^2 s^t (X_A^t X_A)^{-1} s`.
    pub fn residual_norm_sq(&self, lambda: f64) -> f64 {
        self.resid_perp_sq + lambda * lambda * self.sign_quad
    }
}

/// Piecewise-affine map `lambda -> b_lambda` on `[lambda_min, +inf)`.
#[derive(Debug, Clone)]
pub struct LassoPath<'a> {
    x: &'a DesignMatrix,
    y: Vec<f64>,
    y_norm_sq: f64,
    /// Smallest `lambda` with zero solution, `||X^t y||_inf`.
    pub tau: f64,
    pub lambda_min: f64,
    /// Segments in decreasing `lambda` order; the first starts at `tau`.
    pub segments: Vec<Segment>,
    pub kkt_tol: f64,
}

impl<'a> LassoPath<'a> {
    pub fn design(&self) -> &'a DesignMatrix {
        self.x
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    pub fn y_norm_sq(&self) -> f64 {
        self.y_norm_sq
    }

    /// `tau = lambda_K > ... > lambda_0`, the lowest being the path's end.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = vec![self.tau];
        out.extend(self.segments.iter().map(|s| s.lambda_lo));
        out
    }

    /// Smallest penalty covered by the path.
    pub fn lowest_lambda(&self) -> f64 {
        self.segments
            .last()
            .map_or(self.lambda_min.min(self.tau), |s| s.lambda_lo)
    }

    /// Segment containing `lambda`; `Ok(None)` on the zero region `lambda >= tau`.
    pub fn segment_at(&self, lambda: f64) -> Result<Option<&Segment>> {
        if lambda >= self.tau || self.segments.is_empty() {
            if lambda < self.lowest_lambda() || !(lambda > 0.0) {
                return Err(Error::LambdaOutOfRange {
                    lambda,
                    lo: self.lowest_lambda(),
                });
            }
            return Ok(None);
        }
        let lo = self.lowest_lambda();
        if lambda < lo || !(lambda > 0.0) {
            return Err(Error::LambdaOutOfRange { lambda, lo });
        }
        // segments are ordered by decreasing lambda_lo
        let k = self.segments.partition_point(|s| s.lambda_lo > lambda);
        Ok(Some(&self.segments[k.min(self.segments.len() - 1)]))
    }

    /// Index of the segment containing `lambda`, when it is strictly inside one.
    pub fn interior_segment(&self, lambda: f64) -> Result<Option<&Segment>> {
        let seg = self.segment_at(lambda)?;
        if let Some(s) = seg {
            if lambda == s.lambda_lo || lambda == s.lambda_hi {
                return Err(Error::AtBreakpoint(lambda));
            }
        } else if lambda == self.tau {
            return Err(Error::AtBreakpoint(lambda));
        }
        Ok(seg)
    }

    pub fn beta_dense(&self, lambda: f64) -> Result<Vec<f64>> {
        let mut beta = vec![0.0; self.x.p()];
        if let Some(seg) = self.segment_at(lambda)? {
            for (&j, v) in seg.active.iter().zip(seg.coefficients(lambda)) {
                beta[j] = v;
            }
        }
        Ok(beta)
    }

    pub fn l1_norm(&self, lambda: f64) -> Result<f64> {
        Ok(self.segment_at(lambda)?.map_or(0.0, |s| s.l1_norm(lambda)))
    }

    pub fn residual_norm_sq(&self, lambda: f64) -> Result<f64> {
        Ok(self
            .segment_at(lambda)?
            .map_or(self.y_norm_sq, |s| s.residual_norm_sq(lambda)))
    }

    /// Writes `segment,lambda_hi,lambda_lo,active,signs` rows; index lists are
    /// space separated in entry order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["segment", "lambda_hi", "lambda_lo", "active", "signs"])?;
        for (k, s) in self.segments.iter().enumerate() {
            let active: Vec<String> = s.active.iter().map(|j| j.to_string()).collect();
            let signs: Vec<String> = s.signs.iter().map(|v| v.to_string()).collect();
            w.write_record([
                k.to_string(),
                format!("{:?}", s.lambda_hi),
                format!("{:?}", s.lambda_lo),
                active.join(" "),
                signs.join(" "),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Enter { col: usize, sign: i8 },
    Leave { pos: usize },
}

impl Event {
    fn column(&self, active: &[usize]) -> usize {
        match *self {
            Event::Enter { col, .. } => col,
            Event::Leave { pos } => active[pos],
        }
    }
}

/// Computes the path from `tau` down to `lambda_min` with default tolerances.
pub fn homotopy_path<'a>(x: &'a DesignMatrix, y: &[f64], lambda_min: f64) -> Result<LassoPath<'a>> {
    homotopy_path_with(x, y, lambda_min, &PathConfig::default())
}

/// Computes the path from `tau` down to `lambda_min`.
///
/// Once `|A| = n` no column can enter; the path still tracks exits below that
/// point until `lambda_min` is reached.
pub fn homotopy_path_with<'a>(
    x: &'a DesignMatrix,
    y: &[f64],
    lambda_min: f64,
    cfg: &PathConfig,
) -> Result<LassoPath<'a>> {
    check_dims(x, y)?;
    if !(lambda_min > 0.0) {
        return Err(Error::InvalidInput(format!(
            "lambda_min must be positive, got {lambda_min}"
        )));
    }
    let (n, p) = (x.n(), x.p());
    let corr = x.tr_mul_vec(y);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| corr[j].abs().total_cmp(&corr[i].abs()));
    let tau = corr[order[0]].abs();
    let mut path = LassoPath {
        x,
        y: y.to_vec(),
        y_norm_sq: dot(y, y),
        tau,
        lambda_min,
        segments: Vec::new(),
        kkt_tol: cfg.kkt_tol,
    };
    if tau == 0.0 || lambda_min >= tau {
        return Ok(path);
    }
    if p > 1 && tau - corr[order[1]].abs() <= cfg.bp_tol * tau {
        return Err(Error::DegenerateBreakpoint {
            lambda: tau,
            indices: vec![order[0], order[1]],
        });
    }

    let mut factor = ActiveFactor::new();
    let mut signs: Vec<i8> = Vec::new();
    let mut in_active = vec![false; p];
    let j0 = order[0];
    factor.push(x, j0)?;
    signs.push(if corr[j0] > 0.0 { 1 } else { -1 });
    in_active[j0] = true;
    let mut last_changed = j0;
    let mut lambda = tau;
    let max_events = cfg.max_events.unwrap_or(50 * (n + p));

    for _ in 0..max_events {
        let active = factor.cols().to_vec();
        let s: Vec<f64> = signs.iter().map(|&v| v as f64).collect();
        let xty: Vec<f64> = active.iter().map(|&j| corr[j]).collect();
        let intercept = factor.solve(&xty);
        let slope = factor.solve(&s);

        let mut resid = y.to_vec();
        let mut dir = vec![0.0; n];
        for ((&j, &a), &d) in active.iter().zip(&intercept).zip(&slope) {
            axpy(-a, x.column(j), &mut resid);
            axpy(d, x.column(j), &mut dir);
        }
        let seg_template = Segment {
            lambda_hi: lambda,
            lambda_lo: lambda,
            active: active.clone(),
            signs: signs.clone(),
            resid_perp_sq: dot(&resid, &resid),
            sign_quad: dot(&s, &slope),
            sign_dot_ls: dot(&s, &intercept),
            intercept: intercept.clone(),
            slope: slope.clone(),
        };

        // candidate events strictly below the current lambda
        let guard = lambda * (1.0 - 1e-8);
        let admissible = |cand: f64, col: usize| {
            cand > 0.0 && cand < lambda && (col != last_changed || cand < guard)
        };
        let mut events: Vec<(f64, Event)> = Vec::new();
        for (pos, (&a, &d)) in intercept.iter().zip(&slope).enumerate() {
            if d != 0.0 {
                let cand = a / d;
                if admissible(cand, active[pos]) {
                    events.push((cand, Event::Leave { pos }));
                }
            }
        }
        if active.len() < n {
            for j in 0..p {
                if in_active[j] {
                    continue;
                }
                let c0 = dot(x.column(j), &resid);
                let dj = dot(x.column(j), &dir);
                for sign in [1i8, -1] {
                    let denom = sign as f64 - dj;
                    if denom != 0.0 {
                        let cand = c0 / denom;
                        if admissible(cand, j) {
                            events.push((cand, Event::Enter { col: j, sign }));
                        }
                    }
                }
            }
        }
        events.sort_by(|a, b| b.0.total_cmp(&a.0));
        // a column can only contribute its first crossing
        let mut seen = Vec::new();
        events.retain(|(_, e)| {
            let c = e.column(&active);
            if seen.contains(&c) {
                false
            } else {
                seen.push(c);
                true
            }
        });

        let next = events.first().map_or(0.0, |e| e.0);
        if next <= lambda_min {
            path.segments.push(Segment {
                lambda_lo: lambda_min,
                ..seg_template
            });
            return Ok(path);
        }
        if let Some(second) = events.get(1) {
            if next - second.0 <= cfg.bp_tol * next {
                return Err(Error::DegenerateBreakpoint {
                    lambda: next,
                    indices: vec![events[0].1.column(&active), second.1.column(&active)],
                });
            }
        }
        path.segments.push(Segment {
            lambda_lo: next,
            ..seg_template
        });
        match events[0].1 {
            Event::Enter { col, sign } => {
                factor.push(x, col)?;
                signs.push(sign);
                in_active[col] = true;
                last_changed = col;
            }
            Event::Leave { pos } => {
                let col = active[pos];
                factor.remove(x, pos)?;
                signs.remove(pos);
                in_active[col] = false;
                last_changed = col;
            }
        }
        lambda = next;
    }
    Err(Error::NoConvergence {
        what: "homotopy path (event budget exhausted)",
        iterations: max_events,
    })
}

/// Solution at `lambda` read off the path, with a fresh certificate.
pub fn eval_path(path: &LassoPath<'_>, lambda: f64) -> Result<LassoSolution> {
    let beta = path.beta_dense(lambda)?;
    Ok(LassoSolution::from_dense(
        path.x,
        &path.y,
        lambda,
        &beta,
        path.kkt_tol,
    ))
}
