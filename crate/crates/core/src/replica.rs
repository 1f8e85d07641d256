//! Large-N closed forms for the minimal-risk portfolio under budget and
//! expected-return constraints.
//!
//! All functions are pure in `(MomentSet, alpha, R)`. Writing
//! `g(R) = 1 + (R - R1)^2 / V1`:
//!
//! ```text
//! epsilon   = (alpha - 1) / (2 <v^-1>) * g(R)
//! q_w       = g(R) / (alpha - 1) + <v^-2> c(R) / (<v^-1>^2 V1^2)
//! S         = R / sqrt(2 epsilon)
//! q_s       = alpha / ((alpha - 1) <v^-1>) * g(R)
//! eps_OR    = alpha / (2 <v^-1>) * g(R)
//! q_w_OR    = <v^-2> c(R) / (<v^-1>^2 V1^2)
//! eps'      = alpha q_s / 2
//! ```
//!
//! A weighted variance with `|V1| < 1e-14 (R1^2 + 1)` is treated as exactly
//! zero; the return constraint is then only feasible at `R = R1`, where the
//! second term of `q_w` reduces to `<v^-2> / <v^-1>^2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperparams::MomentSet;

/// Smallest accepted period ratio is `1 + ALPHA_MARGIN`.
pub const ALPHA_MARGIN: f64 = 1e-9;
const V1_DEGENERATE: f64 = 1e-14;
/// Relative distance from `R1` still treated as `R = R1` when `V1` vanishes.
const R1_MATCH: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicaPrediction {
    pub alpha: f64,
    pub r: f64,
    pub epsilon: f64,
    pub q_w: f64,
    pub sharpe: f64,
    pub q_s: f64,
    pub epsilon_prime: f64,
    pub epsilon_or: f64,
    pub q_w_or: f64,
    pub kappa: f64,
    pub kappa_prime: f64,
}

/// Sharpe ratio at its maximizer and at the two extremes `R = R1`, `R -> inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpeTriple {
    pub s_at_rstar: f64,
    pub s_at_r1: f64,
    pub s_at_inf: f64,
    pub r_star: f64,
}

impl SharpeTriple {
    /// `(S(R*)^2 - S(R1)^2 - S(inf)^2) / S(R*)^2`.
    pub fn pythagorean_residual(&self) -> f64 {
        let hyp = self.s_at_rstar * self.s_at_rstar;
        (hyp - self.s_at_r1 * self.s_at_r1 - self.s_at_inf * self.s_at_inf) / hyp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrPrediction {
    pub epsilon_or: f64,
    pub q_w_or: f64,
    pub kappa: f64,
    pub kappa_prime: f64,
    pub epsilon_prime: f64,
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 1.0 + ALPHA_MARGIN {
        Ok(())
    } else {
        Err(Error::PeriodRatio { alpha })
    }
}

pub fn is_degenerate(m: &MomentSet) -> bool {
    m.v1.abs() < V1_DEGENERATE * (m.r1 * m.r1 + 1.0)
}

fn at_r1(m: &MomentSet, r: f64) -> bool {
    (r - m.r1).abs() <= R1_MATCH * (1.0 + m.r1.abs())
}

/// `g(R) = 1 + (R - R1)^2 / V1`, and `c(R) / V1^2`.
fn return_terms(m: &MomentSet, r: f64) -> Result<(f64, f64)> {
    if !r.is_finite() {
        return Err(Error::Parameter(format!("return coefficient must be finite, got {r}")));
    }
    if is_degenerate(m) {
        if at_r1(m, r) {
            return Ok((1.0, 1.0));
        }
        return Err(Error::InfeasibleReturn { r, v1: m.v1 });
    }
    let d = r - m.r1;
    Ok((1.0 + d * d / m.v1, m.c_of(r) / (m.v1 * m.v1)))
}

/// Budget-only minimal risk `(alpha - 1) / (2 <v^-1>)`.
pub fn budget_only_risk(moments: &MomentSet, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok((alpha - 1.0) / (2.0 * moments.m_v1))
}

/// Budget-only concentration `1 / (alpha - 1) + <v^-2> / <v^-1>^2`.
pub fn budget_only_concentration(moments: &MomentSet, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(1.0 / (alpha - 1.0) + moments.m_v2 / (moments.m_v1 * moments.m_v1))
}

/// Minimal investment risk per asset.
pub fn epsilon_min(moments: &MomentSet, alpha: f64, r: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let (g, _) = return_terms(moments, r)?;
    Ok((alpha - 1.0) / (2.0 * moments.m_v1) * g)
}

/// Investment concentration `(1/N) sum w_i^2` of the optimal portfolio.
pub fn q_w(moments: &MomentSet, alpha: f64, r: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let (g, c_ratio) = return_terms(moments, r)?;
    Ok(g / (alpha - 1.0) + or_concentration(moments, c_ratio))
}

fn or_concentration(m: &MomentSet, c_ratio: f64) -> f64 {
    m.m_v2 * c_ratio / (m.m_v1 * m.m_v1)
}

pub fn sharpe(moments: &MomentSet, alpha: f64, r: f64) -> Result<f64> {
    let eps = epsilon_min(moments, alpha, r)?;
    Ok(r / (2.0 * eps).sqrt())
}

/// Limit of the Sharpe ratio as `R -> inf`: `sqrt(<v^-1> V1 / (alpha - 1))`.
pub fn sharpe_at_infinity(moments: &MomentSet, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let v1 = if is_degenerate(moments) { 0.0 } else { moments.v1 };
    Ok((moments.m_v1 * v1 / (alpha - 1.0)).sqrt())
}

pub fn sharpe_triple(moments: &MomentSet, alpha: f64) -> Result<SharpeTriple> {
    check_alpha(alpha)?;
    let r1 = moments.r1;
    if r1 == 0.0 || !r1.is_finite() {
        return Err(Error::SharpeUndefined(format!("R1 = {r1}")));
    }
    let v1 = if is_degenerate(moments) { 0.0 } else { moments.v1 };
    let k = moments.m_v1 / (alpha - 1.0);
    Ok(SharpeTriple {
        s_at_rstar: (k * (r1 * r1 + v1)).sqrt(),
        s_at_r1: k.sqrt() * r1,
        s_at_inf: (k * v1).sqrt(),
        r_star: (r1 * r1 + v1) / r1,
    })
}

/// Largest and smallest expected return reachable at risk level `epsilon`.
pub fn dual_return_bounds(moments: &MomentSet, alpha: f64, epsilon: f64) -> Result<(f64, f64)> {
    let floor = budget_only_risk(moments, alpha)?;
    if !epsilon.is_finite() || epsilon < floor * (1.0 - 1e-12) {
        return Err(Error::RiskBelowFloor { epsilon, floor });
    }
    let excess = (epsilon / floor - 1.0).max(0.0);
    let v1 = if is_degenerate(moments) { 0.0 } else { moments.v1 };
    let half_width = (v1 * excess).sqrt();
    Ok((moments.r1 + half_width, moments.r1 - half_width))
}

/// Predictions for the portfolio minimizing the expected risk
/// `(alpha / 2) sum v_i w_i^2`, and the two opportunity losses.
pub fn or_predictions(moments: &MomentSet, alpha: f64, r: f64) -> Result<OrPrediction> {
    check_alpha(alpha)?;
    let (g, c_ratio) = return_terms(moments, r)?;
    let kappa = alpha / (alpha - 1.0);
    let q_s = kappa * g / moments.m_v1;
    Ok(OrPrediction {
        epsilon_or: alpha / (2.0 * moments.m_v1) * g,
        q_w_or: or_concentration(moments, c_ratio),
        kappa,
        kappa_prime: kappa * kappa,
        epsilon_prime: 0.5 * alpha * q_s,
    })
}

/// Every closed form at one `(alpha, R)`.
pub fn predict(moments: &MomentSet, alpha: f64, r: f64) -> Result<ReplicaPrediction> {
    let epsilon = epsilon_min(moments, alpha, r)?;
    let or = or_predictions(moments, alpha, r)?;
    Ok(ReplicaPrediction {
        alpha,
        r,
        epsilon,
        q_w: q_w(moments, alpha, r)?,
        sharpe: r / (2.0 * epsilon).sqrt(),
        q_s: 2.0 * or.epsilon_prime / alpha,
        epsilon_prime: or.epsilon_prime,
        epsilon_or: or.epsilon_or,
        q_w_or: or.q_w_or,
        kappa: or.kappa,
        kappa_prime: or.kappa_prime,
    })
}
