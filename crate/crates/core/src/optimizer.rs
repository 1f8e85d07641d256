//! Exact finite-N solutions for one realized market.
//!
//! With `y = J^{-1} e` and `z = J^{-1} r` the optimal portfolio under the
//! budget constraint `(1/N) sum w_i = 1` and the return constraint
//! `(1/N) sum r_i w_i = R` is `w* = k y + theta z`, where `(k, theta)` solve a
//! 2x2 system in the normalized quadratic forms `e'J^{-1}e / N`,
//! `r'J^{-1}e / N` and `r'J^{-1}r / N`. Only one Cholesky factorization of
//! `J` is needed per market, shared by every `R`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperparams::{empirical_moments, HyperParams};
use crate::linalg::{SpdFactor, CONDITION_LIMIT};
use crate::market::MarketSample;
use crate::replica;

/// Relative size of `ee * rr - re^2` below which the two constraints are
/// treated as collinear.
const COLLINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    pub weights: Vec<f64>,
}

impl Portfolio {
    pub fn n_assets(&self) -> usize {
        self.weights.len()
    }

    /// `(1/N) sum w_i`
    pub fn budget(&self) -> f64 {
        self.weights.iter().sum::<f64>() / self.n_assets() as f64
    }

    /// `(1/N) sum r_i w_i`
    pub fn expected_return(&self, means: &[f64]) -> f64 {
        self.weights.iter().zip(means).map(|(w, r)| w * r).sum::<f64>() / self.n_assets() as f64
    }

    /// `q_w = (1/N) sum w_i^2`
    pub fn concentration(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>() / self.n_assets() as f64
    }

    /// Per-asset expected risk `(alpha / 2N) sum v_i w_i^2`.
    pub fn expected_risk(&self, variances: &[f64], alpha: f64) -> f64 {
        let s: f64 = self.weights.iter().zip(variances).map(|(w, v)| v * w * w).sum();
        0.5 * alpha * s / self.n_assets() as f64
    }

    fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.weights)
    }
}

/// Normalized quadratic forms of `J^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticForms {
    pub ee: f64,
    pub re: f64,
    pub rr: f64,
}

impl QuadraticForms {
    /// `ee * rr - re^2`, non-negative by Cauchy–Schwarz.
    pub fn determinant(&self) -> f64 {
        self.ee * self.rr - self.re * self.re
    }
}

/// Empirical quantities of one trial at one return coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub r: f64,
    pub epsilon: f64,
    pub q_w: f64,
    pub sharpe: f64,
    /// Realized per-asset risk `H(w_OR | X) / N` of the expected-risk minimizer.
    pub epsilon_or: f64,
    /// `(alpha / 2N) sum v_i (w_OR_i)^2`
    pub expected_epsilon_or: f64,
    /// `(alpha / 2N) sum v_i (w*_i)^2`
    pub epsilon_prime: f64,
    pub q_w_or: f64,
    pub forms: QuadraticForms,
    pub r_star_emp: f64,
    pub s_star_emp: f64,
}

/// Investment risk `H(w | X) = (1/2) w' J w` (not divided by N).
pub fn investment_risk(sample: &MarketSample, portfolio: &Portfolio) -> f64 {
    let w = portfolio.to_vector();
    0.5 * w.dot(&(&sample.j * &w))
}

/// A factorized market together with `J^{-1} e` and `J^{-1} r`.
pub struct FactoredMarket<'a> {
    sample: &'a MarketSample,
    params: &'a HyperParams,
    y: DVector<f64>,
    z: DVector<f64>,
    forms: QuadraticForms,
}

impl<'a> FactoredMarket<'a> {
    pub fn new(sample: &'a MarketSample, params: &'a HyperParams) -> Result<Self> {
        Self::with_condition_limit(sample, params, CONDITION_LIMIT)
    }

    pub fn with_condition_limit(sample: &'a MarketSample, params: &'a HyperParams, limit: f64) -> Result<Self> {
        params.validate()?;
        if params.n_assets() != sample.n_assets {
            return Err(Error::Parameter(format!(
                "market has {} assets but hyperparameters have {}",
                sample.n_assets,
                params.n_assets()
            )));
        }
        let factor = SpdFactor::new(&sample.j, limit)?;
        let n = sample.n_assets as f64;
        let e = DVector::from_element(sample.n_assets, 1.0);
        let r = DVector::from_column_slice(&params.means);
        let y = factor.solve(&e);
        let z = factor.solve(&r);
        let forms = QuadraticForms { ee: e.dot(&y) / n, re: r.dot(&y) / n, rr: r.dot(&z) / n };
        if !(forms.ee > 0.0 && forms.rr >= 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(FactoredMarket { sample, params, y, z, forms })
    }

    pub fn forms(&self) -> QuadraticForms {
        self.forms
    }

    fn collinear(&self) -> bool {
        let f = self.forms;
        f.determinant() <= COLLINEAR_TOL * f.ee * f.rr
    }

    /// Risk-minimizing portfolio at return `r`, with its multipliers `(k, theta)`.
    pub fn min_risk(&self, r: f64) -> Result<(Portfolio, f64, f64)> {
        let f = self.forms;
        let (k, theta) = if self.collinear() {
            // r is parallel to e: only R = r'J^{-1}e / e'J^{-1}e is reachable
            // and the return constraint adds nothing to the budget one.
            let ratio = f.re / f.ee;
            if (r - ratio).abs() > 1e-10 * (1.0 + r.abs()) {
                return Err(Error::CollinearConstraints { det: f.determinant() });
            }
            (1.0 / f.ee, 0.0)
        } else {
            let d = f.determinant();
            ((f.rr - f.re * r) / d, (f.ee * r - f.re) / d)
        };
        let w = &self.y * k + &self.z * theta;
        Ok((Portfolio { weights: w.as_slice().to_vec() }, k, theta))
    }

    /// Tangency portfolio `w = z / re`, its return `rr / re` and Sharpe
    /// ratio `sqrt(rr)`.
    pub fn max_sharpe(&self) -> Result<(Portfolio, f64, f64)> {
        let f = self.forms;
        if f.re.abs() <= 1e-14 * (f.ee * f.rr).sqrt() || f.re == 0.0 {
            return Err(Error::SharpeUndefined(format!("r'J^-1 e / N = {}", f.re)));
        }
        let w = &self.z / f.re;
        Ok((Portfolio { weights: w.as_slice().to_vec() }, f.rr / f.re, f.rr.sqrt() * f.re.signum()))
    }

    /// All per-trial quantities at return `r`, given the precomputed
    /// expected-risk minimizer for the same hyperparameters.
    pub fn evaluate(&self, r: f64, or_portfolio: &Portfolio) -> Result<TrialResult> {
        let n = self.sample.n_assets as f64;
        let alpha = self.sample.alpha();
        let (w, k, theta) = self.min_risk(r)?;
        let epsilon = 0.5 * (k + r * theta);
        let (_, r_star_emp, s_star_emp) = self.max_sharpe()?;
        Ok(TrialResult {
            r,
            epsilon,
            q_w: w.concentration(),
            sharpe: r / (2.0 * epsilon).sqrt(),
            epsilon_or: investment_risk(self.sample, or_portfolio) / n,
            expected_epsilon_or: or_portfolio.expected_risk(&self.params.variances, alpha),
            epsilon_prime: w.expected_risk(&self.params.variances, alpha),
            q_w_or: or_portfolio.concentration(),
            forms: self.forms,
            r_star_emp,
            s_star_emp,
        })
    }
}

/// Minimal-risk portfolio under budget and return constraints; returns the
/// portfolio and the multipliers `(k, theta)`.
pub fn solve_min_risk(sample: &MarketSample, params: &HyperParams, r: f64) -> Result<(Portfolio, f64, f64)> {
    FactoredMarket::new(sample, params)?.min_risk(r)
}

pub fn quadratic_forms(sample: &MarketSample, params: &HyperParams) -> Result<QuadraticForms> {
    Ok(FactoredMarket::new(sample, params)?.forms())
}

/// Portfolio minimizing the expected risk `(alpha/2) sum v_i w_i^2` under
/// both constraints. The minimizer does not depend on `alpha`:
/// `w_i = (1/v_i) (1/<v^-1> + (R - R1)(r_i - R1) / (<v^-1> V1))`
/// with the finite-N moments of `params`.
pub fn solve_or_portfolio(params: &HyperParams, r: f64) -> Result<Portfolio> {
    let m = empirical_moments(params)?;
    let slope = if replica::is_degenerate(&m) {
        if (r - m.r1).abs() > 1e-12 * (1.0 + m.r1.abs()) {
            return Err(Error::InfeasibleReturn { r, v1: m.v1 });
        }
        0.0
    } else {
        (r - m.r1) / (m.m_v1 * m.v1)
    };
    let base = 1.0 / m.m_v1;
    let weights =
        params.means.iter().zip(&params.variances).map(|(&ri, &vi)| (base + slope * (ri - m.r1)) / vi).collect();
    Ok(Portfolio { weights })
}

pub fn max_sharpe_portfolio(sample: &MarketSample, params: &HyperParams) -> Result<(Portfolio, f64, f64)> {
    FactoredMarket::new(sample, params)?.max_sharpe()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{generate_market, NoiseSpec};
    use nalgebra::DMatrix;

    /// Generic equality-constrained QP oracle: solve the full
    /// `(N+2) x (N+2)` KKT system for `min (1/2) w'Qw` with
    /// `sum w = N`, `sum r w = N R`.
    fn kkt_oracle(q: &DMatrix<f64>, means: &[f64], r: f64) -> Vec<f64> {
        let n = means.len();
        let mut a = DMatrix::zeros(n + 2, n + 2);
        a.view_mut((0, 0), (n, n)).copy_from(q);
        for i in 0..n {
            a[(i, n)] = 1.0;
            a[(n, i)] = 1.0;
            a[(i, n + 1)] = means[i];
            a[(n + 1, i)] = means[i];
        }
        let mut b = DVector::zeros(n + 2);
        b[n] = n as f64;
        b[n + 1] = n as f64 * r;
        let sol = a.lu().solve(&b).expect("KKT system singular");
        sol.rows(0, n).iter().copied().collect()
    }

    fn small_case(seed: u64) -> (HyperParams, MarketSample) {
        let params = HyperParams::new(vec![1.0, 1.4, 0.7, 2.1, 1.6], vec![0.5, 1.2, 0.9, 2.0, 1.1]).unwrap();
        let s = generate_market(&params, 10, NoiseSpec::Gaussian, seed).unwrap();
        (params, s)
    }

    #[test]
    fn two_assets_fully_determined() {
        let params = HyperParams::new(vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
        let s = generate_market(&params, 6, NoiseSpec::Gaussian, 3).unwrap();
        let (w, _, _) = solve_min_risk(&s, &params, 1.5).unwrap();
        assert!((w.weights[0] - 1.0).abs() < 1e-10);
        assert!((w.weights[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn matches_kkt_oracle() {
        let (params, s) = small_case(42);
        let (w, k, theta) = solve_min_risk(&s, &params, 1.3).unwrap();
        let oracle = kkt_oracle(&s.j, &params.means, 1.3);
        for (a, b) in w.weights.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        assert!((w.budget() - 1.0).abs() < 1e-10);
        assert!((w.expected_return(&params.means) - 1.3).abs() < 1e-10);
        let direct = investment_risk(&s, &w) / 5.0;
        assert!(((k + 1.3 * theta) / 2.0 - direct).abs() < 1e-8 * direct);
    }

    #[test]
    fn or_portfolio_matches_kkt_oracle() {
        let (params, _) = small_case(0);
        let w = solve_or_portfolio(&params, 1.8).unwrap();
        let q = DMatrix::from_diagonal(&DVector::from_column_slice(&params.variances));
        let oracle = kkt_oracle(&q, &params.means, 1.8);
        for (a, b) in w.weights.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn equal_means_reduce_to_budget_only() {
        let params = HyperParams::new(vec![1.2; 6], vec![0.5, 1.0, 1.5, 2.0, 1.0, 0.7]).unwrap();
        let s = generate_market(&params, 14, NoiseSpec::Gaussian, 8).unwrap();
        let fm = FactoredMarket::new(&s, &params).unwrap();
        let (w, _, theta) = fm.min_risk(1.2).unwrap();
        assert_eq!(theta, 0.0);
        let scale = 1.0 / fm.forms().ee;
        for (wi, yi) in w.weights.iter().zip(fm.y.iter()) {
            assert!((wi - yi * scale).abs() < 1e-12);
        }
        assert!(matches!(fm.min_risk(1.3), Err(Error::CollinearConstraints { .. })));

        let w_or = solve_or_portfolio(&params, 1.2).unwrap();
        assert!((w_or.budget() - 1.0).abs() < 1e-14);
        assert!(matches!(solve_or_portfolio(&params, 1.0), Err(Error::InfeasibleReturn { .. })));
        let (_, r_star, _) = fm.max_sharpe().unwrap();
        assert!((r_star - 1.2).abs() < 1e-12);
    }

    #[test]
    fn unit_means_give_equal_forms() {
        let params = HyperParams::new(vec![1.0; 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = generate_market(&params, 9, NoiseSpec::Gaussian, 2).unwrap();
        let f = quadratic_forms(&s, &params).unwrap();
        assert_eq!(f.re, f.ee);
        let (w, r_star, _) = max_sharpe_portfolio(&s, &params).unwrap();
        assert!((r_star - 1.0).abs() < 1e-14);
        assert!((w.budget() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_market() {
        let x = DMatrix::from_row_slice(1, 3, &[0.5, -1.0, 2.0]);
        let s = MarketSample::from_returns(x);
        let params = HyperParams::new(vec![1.0], vec![1.0]).unwrap();
        let f = quadratic_forms(&s, &params).unwrap();
        assert!((f.ee - 1.0 / 5.25).abs() < 1e-15);
    }

    #[test]
    fn tangency_portfolio_properties() {
        let (params, s) = small_case(7);
        let (w, r_star, s_star) = max_sharpe_portfolio(&s, &params).unwrap();
        assert!((w.budget() - 1.0).abs() < 1e-12);
        assert!((w.expected_return(&params.means) - r_star).abs() < 1e-10);
        let eps = investment_risk(&s, &w) / 5.0;
        assert!((r_star / (2.0 * eps).sqrt() - s_star).abs() < 1e-10);
        // grid search over R peaks at r_star
        let fm = FactoredMarket::new(&s, &params).unwrap();
        let step = 1e-3;
        let best = (0..4000)
            .map(|i| 0.5 + step * i as f64)
            .map(|r| {
                let (_, k, th) = fm.min_risk(r).unwrap();
                (r, r / (k + r * th).sqrt())
            })
            .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        assert!((best.0 - r_star).abs() <= step, "{} vs {}", best.0, r_star);
        assert!(best.1 <= s_star + 1e-10);
    }

    #[test]
    fn permutation_equivariance() {
        let (params, s) = small_case(11);
        let perm = [3usize, 0, 4, 1, 2];
        let pparams = HyperParams::new(
            perm.iter().map(|&i| params.means[i]).collect(),
            perm.iter().map(|&i| params.variances[i]).collect(),
        )
        .unwrap();
        let px = DMatrix::from_fn(5, 10, |i, mu| s.x[(perm[i], mu)]);
        let ps = MarketSample::from_returns(px);
        let (w, k, th) = solve_min_risk(&s, &params, 1.5).unwrap();
        let (pw, pk, pth) = solve_min_risk(&ps, &pparams, 1.5).unwrap();
        for (i, &src) in perm.iter().enumerate() {
            assert!((pw.weights[i] - w.weights[src]).abs() < 1e-10);
        }
        assert!((k - pk).abs() < 1e-10 * k.abs().max(1.0));
        assert!((th - pth).abs() < 1e-10 * th.abs().max(1.0));
    }

    #[test]
    fn quenched_risk_below_annealed_choice() {
        let (params, s) = small_case(19);
        let fm = FactoredMarket::new(&s, &params).unwrap();
        let w_or = solve_or_portfolio(&params, 1.4).unwrap();
        let t = fm.evaluate(1.4, &w_or).unwrap();
        assert!(t.epsilon_or >= t.epsilon);
        assert!(t.sharpe <= t.s_star_emp + 1e-10);
        assert!(t.forms.determinant() >= 0.0);
    }

    #[test]
    fn rejects_singular_gram() {
        let params = HyperParams::new(vec![1.0, 2.0, 3.0], vec![1.0; 3]).unwrap();
        // rank-2 J from two periods
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let s = MarketSample::from_returns(x);
        let err = solve_min_risk(&s, &params, 2.0).unwrap_err();
        assert!(err.is_numerical(), "{err:?}");
    }
}
