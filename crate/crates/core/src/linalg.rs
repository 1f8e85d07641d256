//! Cholesky factorization of `J` with a cheap condition estimate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Trials whose condition estimate exceeds this are rejected.
pub const CONDITION_LIMIT: f64 = 1e12;

const POWER_STEPS: usize = 12;

pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    cond_estimate: f64,
}

impl SpdFactor {
    /// Factorizes `matrix` and rejects it when the condition estimate exceeds
    /// `limit`.
    pub fn new(matrix: &DMatrix<f64>, limit: f64) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || n != matrix.ncols() {
            return Err(Error::Parameter(format!(
                "expected a non-empty square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let chol = Cholesky::new(matrix.clone()).ok_or(Error::NotPositiveDefinite)?;
        let l = chol.l_dirty();
        let (mut dmin, mut dmax) = (f64::INFINITY, 0.0_f64);
        for i in 0..n {
            let d = l[(i, i)];
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::NotPositiveDefinite);
            }
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
        let mut factor = SpdFactor { chol, cond_estimate: (dmax / dmin).powi(2) };
        // Power and inverse-power iteration both approach the extreme
        // eigenvalues from inside, so the ratio is a lower bound on cond_2.
        let start = DVector::from_fn(n, |i, _| 1.0 + (i % 7) as f64 * 0.1);
        let (mut hi, mut lo) = (start.clone(), start);
        let (mut lmax, mut lmin_inv) = (0.0, 0.0);
        for _ in 0..POWER_STEPS {
            hi /= hi.norm();
            let next = matrix * &hi;
            lmax = hi.dot(&next);
            hi = next;
            lo /= lo.norm();
            let next = factor.solve(&lo);
            lmin_inv = lo.dot(&next);
            lo = next;
        }
        if lmax > 0.0 && lmin_inv > 0.0 {
            factor.cond_estimate = factor.cond_estimate.max(lmax * lmin_inv);
        }
        // Written so that a NaN estimate is rejected too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(factor.cond_estimate <= limit) {
            return Err(Error::IllConditioned { estimate: factor.cond_estimate, limit });
        }
        Ok(factor)
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn cond_estimate(&self) -> f64 {
        self.cond_estimate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let f = SpdFactor::new(&a, CONDITION_LIMIT).unwrap();
        let x = f.solve(&DVector::from_vec(vec![1.0, 2.0]));
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-15);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-15);
        // exact cond is (7 + sqrt 5) / (7 - sqrt 5)
        let exact = (7.0 + 5f64.sqrt()) / (7.0 - 5f64.sqrt());
        assert!(f.cond_estimate() <= exact * (1.0 + 1e-12));
        assert!(f.cond_estimate() > 0.9 * exact);
    }

    #[test]
    fn rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(SpdFactor::new(&a, CONDITION_LIMIT), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn rejects_ill_conditioned() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-13]));
        assert!(matches!(SpdFactor::new(&a, CONDITION_LIMIT), Err(Error::IllConditioned { .. })));
        assert!(SpdFactor::new(&a, 1e14).is_ok());
    }
}
