//! Dense linear algebra on column subsets of a design.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::model::{dot, DesignMatrix};

/// Refactorize from scratch once the estimated condition number exceeds this.
pub(crate) const REFACTOR_CONDITION: f64 = 1e10;

/// Gram matrix `X_S^t X_S`.
pub(crate) fn gram(x: &DesignMatrix, cols: &[usize]) -> DMatrix<f64> {
    let k = cols.len();
    let mut g = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in 0..=a {
            let v = dot(x.column(cols[a]), x.column(cols[b]));
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    g
}

/// Cholesky factor of a column subset's Gram matrix.
pub(crate) fn factor(x: &DesignMatrix, cols: &[usize]) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(gram(x, cols)).ok_or_else(|| Error::SingularSubmatrix(cols.to_vec()))
}

pub(crate) fn chol_solve(chol: &Cholesky<f64, Dyn>, rhs: &[f64]) -> Vec<f64> {
    chol.solve(&DVector::from_column_slice(rhs))
        .as_slice()
        .to_vec()
}

/// Squared-diagonal ratio of the factor, a lower bound on the condition number.
pub(crate) fn condition_estimate(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    let k = l.nrows();
    if k == 0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..k {
        let d = l[(i, i)].abs();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (hi / lo).powi(2)
}

/// Factorization of `X_A^t X_A` maintained under column insertion and removal.
#[derive(Debug, Clone)]
pub(crate) struct ActiveFactor {
    cols: Vec<usize>,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl ActiveFactor {
    pub fn new() -> Self {
        Self {
            cols: Vec::new(),
            chol: None,
        }
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    /// Appends column `j`, updating the factor by a bordered rank-one step.
    pub fn push(&mut self, x: &DesignMatrix, j: usize) -> Result<()> {
        let mut g: Vec<f64> = self
            .cols
            .iter()
            .map(|&k| dot(x.column(k), x.column(j)))
            .collect();
        g.push(dot(x.column(j), x.column(j)));
        self.cols.push(j);
        let updated = match &self.chol {
            None => Cholesky::new(DMatrix::from_element(1, 1, g[0])),
            Some(chol) => {
                let pos = g.len() - 1;
                let next = chol.insert_column(pos, DVector::from_vec(g));
                let d = next.l_dirty()[(pos, pos)];
                (d.is_finite() && d > 0.0).then_some(next)
            }
        };
        match updated {
            Some(c) if condition_estimate(&c) <= REFACTOR_CONDITION => self.chol = Some(c),
            _ => self.refactor(x)?,
        }
        Ok(())
    }

    /// Removes the column at position `pos` of the active list.
    pub fn remove(&mut self, x: &DesignMatrix, pos: usize) -> Result<()> {
        self.cols.remove(pos);
        if self.cols.is_empty() {
            self.chol = None;
            return Ok(());
        }
        let next = self.chol.as_ref().map(|c| c.remove_column(pos));
        match next {
            Some(c)
                if condition_estimate(&c) <= REFACTOR_CONDITION
                    && c.l_dirty().iter().all(|v| v.is_finite()) =>
            {
                self.chol = Some(c)
            }
            _ => self.refactor(x)?,
        }
        Ok(())
    }

    fn refactor(&mut self, x: &DesignMatrix) -> Result<()> {
        let chol = factor(x, &self.cols)?;
        let d_min = (0..self.cols.len())
            .map(|i| chol.l_dirty()[(i, i)])
            .fold(f64::INFINITY, f64::min);
        if !(d_min > 1e-7) {
            return Err(Error::SingularSubmatrix(self.cols.clone()));
        }
        self.chol = Some(chol);
        Ok(())
    }

    /// `(X_A^t X_A)^{-1} rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        match &self.chol {
            None => Vec::new(),
            Some(c) => chol_solve(c, rhs),
        }
    }
}
