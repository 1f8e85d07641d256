//! Asset hyperparameters `(r_i, v_i)` and the weighted moments that drive
//! every closed-form prediction.
//!
//! Moments are written `<f(r, v)>` for the large-N asset average. The
//! population version integrates over the generating distributions; the
//! empirical version averages over a finite draw. Both produce a
//! [`MomentSet`] through the same code path so the derived quantities
//! (`R1`, `R2`, `V1`, `V2`) are computed identically.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Absolute-plus-relative tolerance for population moment integrals.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// Below this distance from 1 the power-law inverse CDF is replaced by its
/// logarithmic limit.
const LOG_BRANCH_WIDTH: f64 = 1e-8;

/// Power-law density `f(x) ∝ x^{-c}` truncated to `[lower, upper]`.
///
/// `lower == upper` is accepted and treated as a point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundedPareto {
    pub lower: f64,
    pub upper: f64,
    pub power: f64,
}

impl BoundedPareto {
    pub fn new(lower: f64, upper: f64, power: f64) -> Result<Self> {
        let dist = BoundedPareto { lower, upper, power };
        dist.validate()?;
        Ok(dist)
    }

    pub fn validate(&self) -> Result<()> {
        let BoundedPareto { lower, upper, power } = *self;
        if !(lower.is_finite() && upper.is_finite() && power.is_finite()) {
            return Err(Error::Parameter(format!(
                "bounded Pareto parameters must be finite, got ({lower}, {upper}, {power})"
            )));
        }
        if lower <= 0.0 {
            return Err(Error::Parameter(format!("bounded Pareto lower bound must be positive, got {lower}")));
        }
        if upper < lower {
            return Err(Error::Parameter(format!("bounded Pareto upper bound {upper} is below lower bound {lower}")));
        }
        if power <= 0.0 {
            return Err(Error::Parameter(format!("bounded Pareto power must be positive, got {power}")));
        }
        Ok(())
    }

    pub fn is_point_mass(&self) -> bool {
        self.lower == self.upper
    }

    fn log_branch(&self) -> bool {
        (1.0 - self.power).abs() < LOG_BRANCH_WIDTH
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.lower || x > self.upper || self.is_point_mass() {
            return 0.0;
        }
        if self.log_branch() {
            return 1.0 / (x * (self.upper / self.lower).ln());
        }
        let e = 1.0 - self.power;
        e / (self.upper.powf(e) - self.lower.powf(e)) * x.powf(-self.power)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < self.lower {
            return 0.0;
        }
        if x >= self.upper {
            return 1.0;
        }
        if self.log_branch() {
            return (x / self.lower).ln() / (self.upper / self.lower).ln();
        }
        let e = 1.0 - self.power;
        let lo = self.lower.powf(e);
        ((x.powf(e) - lo) / (self.upper.powf(e) - lo)).clamp(0.0, 1.0)
    }

    /// Inverse CDF. `lambda` is clamped to `[0, 1]`.
    pub fn quantile(&self, lambda: f64) -> f64 {
        let lambda = lambda.clamp(0.0, 1.0);
        if self.is_point_mass() {
            return self.lower;
        }
        if lambda == 0.0 {
            return self.lower;
        }
        if lambda == 1.0 {
            return self.upper;
        }
        let x = if self.log_branch() {
            self.lower * (self.upper / self.lower).powf(lambda)
        } else {
            let e = 1.0 - self.power;
            (lambda * self.upper.powf(e) + (1.0 - lambda) * self.lower.powf(e)).powf(1.0 / e)
        };
        x.clamp(self.lower, self.upper)
    }

    /// `E[g(X)]` by double-exponential quadrature.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> Result<f64> {
        if self.is_point_mass() {
            return Ok(g(self.lower));
        }
        // Estimate the scale first so the tolerance can be made relative.
        let f = |x: f64| g(x) * self.pdf(x);
        let rough = quadrature::integrate(f, self.lower, self.upper, 1e-6);
        let target = QUADRATURE_TOL * rough.integral.abs().max(1.0) * 1e-2;
        let out = quadrature::integrate(f, self.lower, self.upper, target);
        let allowed = QUADRATURE_TOL * (1.0 + out.integral.abs());
        if !out.integral.is_finite() || out.error_estimate > allowed {
            return Err(Error::Quadrature(format!(
                "error estimate {:e} exceeds {:e} on [{}, {}]",
                out.error_estimate, allowed, self.lower, self.upper
            )));
        }
        Ok(out.integral)
    }
}

/// Marginal distribution of one hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    BoundedPareto(BoundedPareto),
    PointMass {
        value: f64,
    },
    /// Equal-weight two-point law on `{low, high}`.
    TwoPoint {
        low: f64,
        high: f64,
    },
}

impl Marginal {
    pub fn bounded_pareto(lower: f64, upper: f64, power: f64) -> Result<Self> {
        Ok(Marginal::BoundedPareto(BoundedPareto::new(lower, upper, power)?))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Marginal::BoundedPareto(d) => d.validate(),
            Marginal::PointMass { value } if value.is_finite() => Ok(()),
            Marginal::TwoPoint { low, high } if low.is_finite() && high.is_finite() => Ok(()),
            other => Err(Error::Parameter(format!("non-finite marginal {other:?}"))),
        }
    }

    /// Closed support interval.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Marginal::BoundedPareto(d) => (d.lower, d.upper),
            Marginal::PointMass { value } => (value, value),
            Marginal::TwoPoint { low, high } => (low.min(high), low.max(high)),
        }
    }

    fn excludes_zero(&self) -> bool {
        match *self {
            Marginal::TwoPoint { low, high } => low != 0.0 && high != 0.0,
            _ => {
                let (a, b) = self.support();
                a > 0.0 || b < 0.0
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Marginal::BoundedPareto(d) => sample_bounded_pareto(&d, rng.random::<f64>()),
            Marginal::PointMass { value } => value,
            Marginal::TwoPoint { low, high } => {
                if rng.random::<bool>() {
                    high
                } else {
                    low
                }
            }
        }
    }

    pub fn expect(&self, g: impl Fn(f64) -> f64) -> Result<f64> {
        match *self {
            Marginal::BoundedPareto(d) => d.expect(g),
            Marginal::PointMass { value } => Ok(g(value)),
            Marginal::TwoPoint { low, high } => Ok(0.5 * (g(low) + g(high))),
        }
    }
}

/// How the variance of an asset is tied to its mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// `v_i = h_i r_i^2` with `h_i` drawn from the ratio distribution.
    #[default]
    Product,
    /// `v_i` drawn directly from the ratio distribution, independent of `r_i`.
    Independent,
}

/// Generating model for `(r_i, v_i)`: the two marginals are independent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperModel {
    pub mean_dist: Marginal,
    /// Law of `h_i` under [`Coupling::Product`], of `v_i` under
    /// [`Coupling::Independent`].
    pub ratio_dist: Marginal,
    #[serde(default)]
    pub coupling: Coupling,
}

impl HyperModel {
    /// Bounded Pareto `(l, u, c)` for both `r` and `h`, with `v = h r^2`.
    pub fn pareto_product(mean: (f64, f64, f64), ratio: (f64, f64, f64)) -> Result<Self> {
        let model = HyperModel {
            mean_dist: Marginal::bounded_pareto(mean.0, mean.1, mean.2)?,
            ratio_dist: Marginal::bounded_pareto(ratio.0, ratio.1, ratio.2)?,
            coupling: Coupling::Product,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.mean_dist.validate()?;
        self.ratio_dist.validate()?;
        let (lo, _) = self.ratio_dist.support();
        if lo <= 0.0 {
            return Err(Error::Parameter(format!(
                "ratio/variance distribution must have strictly positive support, got lower end {lo}"
            )));
        }
        if self.coupling == Coupling::Product && !self.mean_dist.excludes_zero() {
            return Err(Error::Parameter("v = h r^2 requires the mean distribution to exclude r = 0".into()));
        }
        Ok(())
    }

    /// `<v^{-a} phi(r)>` under the model.
    fn weighted(&self, a: i32, phi: impl Fn(f64) -> f64) -> Result<f64> {
        let ratio_part = self.ratio_dist.expect(|h| h.powi(-a))?;
        let mean_part = match self.coupling {
            Coupling::Product => self.mean_dist.expect(|r| r.powi(-2 * a) * phi(r))?,
            Coupling::Independent => self.mean_dist.expect(&phi)?,
        };
        Ok(ratio_part * mean_part)
    }
}

/// Per-asset means and variances of one market draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl HyperParams {
    pub fn new(means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let p = HyperParams { means, variances };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.means.is_empty() {
            return Err(Error::Parameter("at least one asset is required".into()));
        }
        if self.means.len() != self.variances.len() {
            return Err(Error::Parameter(format!("{} means but {} variances", self.means.len(), self.variances.len())));
        }
        if let Some(i) = self.means.iter().position(|r| !r.is_finite()) {
            return Err(Error::Parameter(format!("mean {i} is not finite")));
        }
        if let Some((index, &value)) = self.variances.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Domain { index, value });
        }
        Ok(())
    }

    pub fn n_assets(&self) -> usize {
        self.means.len()
    }
}

/// The six weighted raw moments and the derived weighted means/variances.
///
/// `R1`, `V1` are the mean and variance of `r` under the `v^{-1}`-weighted
/// asset measure; `R2`, `V2` the same under `v^{-2}` weighting. The
/// variances are computed in centered form, so they are non-negative and
/// vanish for a point-mass `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub m_v1: f64,
    pub m_v1r: f64,
    pub m_v1r2: f64,
    pub m_v2: f64,
    pub m_v2r: f64,
    pub m_v2r2: f64,
    pub r1: f64,
    pub r2: f64,
    pub v1: f64,
    pub v2: f64,
}

impl MomentSet {
    /// Builds the set from an oracle for `<v^{-a} phi(r)>`.
    fn from_weighted<F>(weighted: F) -> Result<Self>
    where
        F: Fn(i32, &dyn Fn(f64) -> f64) -> Result<f64>,
    {
        let m_v1 = weighted(1, &|_| 1.0)?;
        let m_v1r = weighted(1, &|r| r)?;
        let m_v1r2 = weighted(1, &|r| r * r)?;
        let m_v2 = weighted(2, &|_| 1.0)?;
        let m_v2r = weighted(2, &|r| r)?;
        let m_v2r2 = weighted(2, &|r| r * r)?;
        if !(m_v1 > 0.0 && m_v2 > 0.0) {
            return Err(Error::Parameter(format!(
                "weighted moments <v^-1> = {m_v1}, <v^-2> = {m_v2} must be positive"
            )));
        }
        let r1 = m_v1r / m_v1;
        let r2 = m_v2r / m_v2;
        let v1 = weighted(1, &|r| (r - r1) * (r - r1))? / m_v1;
        let v2 = weighted(2, &|r| (r - r2) * (r - r2))? / m_v2;
        Ok(MomentSet { m_v1, m_v1r, m_v1r2, m_v2, m_v2r, m_v2r2, r1, r2, v1: v1.max(0.0), v2: v2.max(0.0) })
    }

    /// Builds a set from the six raw moments, deriving `R1, R2, V1, V2`
    /// by the uncentered formulas.
    pub fn from_raw(m_v1: f64, m_v1r: f64, m_v1r2: f64, m_v2: f64, m_v2r: f64, m_v2r2: f64) -> Result<Self> {
        if !(m_v1 > 0.0 && m_v2 > 0.0) {
            return Err(Error::Parameter(format!(
                "weighted moments <v^-1> = {m_v1}, <v^-2> = {m_v2} must be positive"
            )));
        }
        let r1 = m_v1r / m_v1;
        let r2 = m_v2r / m_v2;
        let v1 = m_v1r2 / m_v1 - r1 * r1;
        let v2 = m_v2r2 / m_v2 - r2 * r2;
        if v1 < -1e-12 * (m_v1r2 / m_v1).abs() || v2 < -1e-12 * (m_v2r2 / m_v2).abs() {
            return Err(Error::Parameter(format!(
                "raw moments imply negative weighted variance (V1 = {v1}, V2 = {v2})"
            )));
        }
        Ok(MomentSet { m_v1, m_v1r, m_v1r2, m_v2, m_v2r, m_v2r2, r1, r2, v1: v1.max(0.0), v2: v2.max(0.0) })
    }

    /// `c(R) = V2 (R - R1)^2 + (V1 + (R - R1)(R2 - R1))^2`.
    pub fn c_of(&self, r: f64) -> f64 {
        let d = r - self.r1;
        let t = self.v1 + d * (self.r2 - self.r1);
        self.v2 * d * d + t * t
    }

    /// Moments after `v -> scale * v`.
    pub fn scale_variances(&self, scale: f64) -> MomentSet {
        let s1 = 1.0 / scale;
        let s2 = s1 * s1;
        MomentSet {
            m_v1: self.m_v1 * s1,
            m_v1r: self.m_v1r * s1,
            m_v1r2: self.m_v1r2 * s1,
            m_v2: self.m_v2 * s2,
            m_v2r: self.m_v2r * s2,
            m_v2r2: self.m_v2r2 * s2,
            ..*self
        }
    }

    /// Moments after `r -> r + shift`.
    pub fn shift_means(&self, shift: f64) -> MomentSet {
        let d = shift;
        MomentSet {
            m_v1r: self.m_v1r + d * self.m_v1,
            m_v1r2: self.m_v1r2 + 2.0 * d * self.m_v1r + d * d * self.m_v1,
            m_v2r: self.m_v2r + d * self.m_v2,
            m_v2r2: self.m_v2r2 + 2.0 * d * self.m_v2r + d * d * self.m_v2,
            r1: self.r1 + d,
            r2: self.r2 + d,
            ..*self
        }
    }
}

/// Inverse-CDF draw from a bounded Pareto law.
pub fn sample_bounded_pareto(dist: &BoundedPareto, uniform_draw: f64) -> f64 {
    dist.quantile(uniform_draw)
}

/// Draws `n_assets` independent `(r_i, v_i)` pairs.
///
/// For each asset the mean is drawn first, then the ratio (or variance),
/// both from the same ChaCha stream seeded by `rng_seed`.
pub fn sample_hyperparams(model: &HyperModel, n_assets: usize, rng_seed: u64) -> Result<HyperParams> {
    model.validate()?;
    if n_assets == 0 {
        return Err(Error::Parameter("n_assets must be at least 1".into()));
    }
    let mut rng = seed::rng(rng_seed);
    let mut means = Vec::with_capacity(n_assets);
    let mut variances = Vec::with_capacity(n_assets);
    for _ in 0..n_assets {
        let r = model.mean_dist.sample(&mut rng);
        let h = model.ratio_dist.sample(&mut rng);
        let v = match model.coupling {
            Coupling::Product => h * r * r,
            Coupling::Independent => h,
        };
        means.push(r);
        variances.push(v);
    }
    HyperParams::new(means, variances)
}

/// Large-N moments of the model, by quadrature on each 1-D marginal.
pub fn population_moments(model: &HyperModel) -> Result<MomentSet> {
    model.validate()?;
    MomentSet::from_weighted(|a, phi| model.weighted(a, phi))
}

/// Finite-N plug-in moments of one draw.
pub fn empirical_moments(params: &HyperParams) -> Result<MomentSet> {
    params.validate()?;
    let n = params.n_assets() as f64;
    MomentSet::from_weighted(|a, phi| {
        let s: f64 = params.means.iter().zip(&params.variances).map(|(&r, &v)| v.powi(-a) * phi(r)).sum();
        Ok(s / n)
    })
}
