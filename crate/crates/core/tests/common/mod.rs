#![allow(dead_code)]

use varlasso::{DesignMatrix, GroundTruth, Observation};

/// Gaussian design, random sparse truth and noisy response from one seed.
pub fn instance(
    n: usize,
    p: usize,
    s: usize,
    magnitude: f64,
    sigma: f64,
    seed: u64,
) -> (DesignMatrix, GroundTruth, Observation) {
    let x = DesignMatrix::gaussian(n, p, seed).unwrap();
    let truth = GroundTruth::generate(p, s, magnitude, sigma, seed ^ 0x5eed).unwrap();
    let obs = Observation::generate(&x, &truth, seed ^ 0xfeed).unwrap();
    (x, truth, obs)
}

pub fn residual(x: &DesignMatrix, y: &[f64], beta: &[f64]) -> Vec<f64> {
    let fit = x.mul_vec(beta);
    y.iter().zip(&fit).map(|(a, b)| a - b).collect()
}

pub fn objective(x: &DesignMatrix, y: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let r = residual(x, y, beta);
    0.5 * r.iter().map(|v| v * v).sum::<f64>() + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Accelerated proximal gradient with gradient-based restart. Independent of
/// the library solvers: only the matrix-vector products are shared.
pub fn prox_grad(x: &DesignMatrix, y: &[f64], lambda: f64) -> Vec<f64> {
    let p = x.p();
    let l = x.opnorm().unwrap().powi(2);
    let step = 1.0 / l;
    let mut b = vec![0.0; p];
    let mut prev = b.clone();
    let mut v = b.clone();
    let mut t: f64 = 1.0;
    for _ in 0..500_000 {
        let g = x.tr_mul_vec(&residual(x, y, &v));
        let next: Vec<f64> = v
            .iter()
            .zip(&g)
            .map(|(vi, gi)| {
                let z = vi + step * gi;
                z.signum() * (z.abs() - step * lambda).max(0.0)
            })
            .collect();
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        // restart momentum when it points uphill
        let uphill: f64 = v
            .iter()
            .zip(&next)
            .zip(&b)
            .map(|((vi, ni), bi)| (vi - ni) * (ni - bi))
            .sum();
        let moved = next
            .iter()
            .zip(&b)
            .fold(0.0f64, |m, (a, c)| m.max((a - c).abs()));
        prev.clone_from(&b);
        b = next;
        if uphill > 0.0 {
            t = 1.0;
            v.clone_from(&b);
        } else {
            let w = (t - 1.0) / t_next;
            v = b
                .iter()
                .zip(&prev)
                .map(|(bi, pi)| bi + w * (bi - pi))
                .collect();
            t = t_next;
        }
        if moved < 1e-15 {
            break;
        }
    }
    b
}

/// Coherence by explicit double loop over column pairs.
pub fn brute_coherence(x: &DesignMatrix) -> f64 {
    let mut mu: f64 = 0.0;
    for i in 0..x.p() {
        for j in 0..i {
            let d: f64 = x
                .column(i)
                .iter()
                .zip(x.column(j))
                .map(|(a, b)| a * b)
                .sum();
            mu = mu.max(d.abs());
        }
    }
    mu
}

/// `lambda` values at every breakpoint and segment midpoint of a path.
pub fn probe_points(path: &varlasso::LassoPath<'_>) -> Vec<f64> {
    let mut pts = Vec::new();
    for seg in &path.segments {
        pts.push(seg.lambda_hi);
        pts.push(seg.midpoint());
    }
    if let Some(last) = path.segments.last() {
        pts.push(last.lambda_lo);
    }
    pts
}
