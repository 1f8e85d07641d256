//! Monte Carlo protocol: for each trial draw fresh hyperparameters and a
//! fresh return matrix, factorize `J` once, and evaluate every return
//! coefficient of the grid on that market.
//!
//! Trial `m` uses the seeds `seed::derive(seed, m, HYPER_STREAM)` and
//! `seed::derive(seed, m, NOISE_STREAM)`, so results do not depend on how
//! trials are scheduled across workers. Aggregation runs in trial order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperparams::{
    empirical_moments, population_moments, sample_hyperparams, HyperModel, HyperParams, MomentSet,
};
use crate::market::{generate_market, NoiseSpec};
use crate::optimizer::{solve_or_portfolio, FactoredMarket, TrialResult};
use crate::replica::{self, ReplicaPrediction, SharpeTriple};
use crate::seed::{self, HYPER_STREAM, NOISE_STREAM};
use crate::stats::Estimate;

/// Where the per-asset `(r_i, v_i)` come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperSource {
    /// Redrawn from the model in every trial.
    Model(HyperModel),
    /// Fixed list shared by every trial; its moments are used as the
    /// population moments.
    Explicit(HyperParams),
}

impl HyperSource {
    pub fn moments(&self) -> Result<MomentSet> {
        match self {
            HyperSource::Model(m) => population_moments(m),
            HyperSource::Explicit(p) => empirical_moments(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_assets: usize,
    /// `p / N`; ignored when `n_periods` is set.
    #[serde(default)]
    pub period_ratio: Option<f64>,
    #[serde(default)]
    pub n_periods: Option<usize>,
    pub n_trials: usize,
    #[serde(default)]
    pub seed: u64,
    pub hyper: HyperSource,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub r_grid: Vec<f64>,
    /// Worker threads; 0 lets the thread pool decide.
    #[serde(default)]
    pub workers: usize,
}

impl ExperimentConfig {
    /// The (1,2,2) bounded Pareto setup for both `r` and `h` with `v = h r^2`
    /// and a 21-point grid on `[1, 2]`.
    pub fn pareto_reference(n_assets: usize, period_ratio: f64, n_trials: usize) -> Self {
        ExperimentConfig {
            n_assets,
            period_ratio: Some(period_ratio),
            n_periods: None,
            n_trials,
            seed: 1,
            hyper: HyperSource::Model(
                HyperModel::pareto_product((1.0, 2.0, 2.0), (1.0, 2.0, 2.0)).expect("reference model is valid"),
            ),
            noise: NoiseSpec::Gaussian,
            r_grid: (0..=20).map(|i| 1.0 + 0.05 * i as f64).collect(),
            workers: 0,
        }
    }

    pub fn n_periods(&self) -> Result<usize> {
        match (self.n_periods, self.period_ratio) {
            (Some(p), _) => Ok(p),
            (None, Some(a)) if a.is_finite() && a > 0.0 => Ok((a * self.n_assets as f64).round() as usize),
            (None, Some(a)) => Err(Error::PeriodRatio { alpha: a }),
            (None, None) => Err(Error::Parameter("either n_periods or period_ratio is required".into())),
        }
    }

    /// Realized period ratio `p / N`.
    pub fn alpha(&self) -> Result<f64> {
        Ok(self.n_periods()? as f64 / self.n_assets as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_assets == 0 {
            return Err(Error::Parameter("n_assets must be at least 1".into()));
        }
        if self.n_trials == 0 {
            return Err(Error::Parameter("n_trials must be at least 1".into()));
        }
        if self.r_grid.is_empty() {
            return Err(Error::Parameter("r_grid must not be empty".into()));
        }
        if let Some(r) = self.r_grid.iter().find(|r| !r.is_finite()) {
            return Err(Error::Parameter(format!("r_grid entry {r} is not finite")));
        }
        let p = self.n_periods()?;
        if p <= self.n_assets {
            return Err(Error::PeriodRatio { alpha: p as f64 / self.n_assets as f64 });
        }
        replica::check_alpha(self.alpha()?)?;
        match &self.hyper {
            HyperSource::Model(m) => m.validate()?,
            HyperSource::Explicit(h) => {
                h.validate()?;
                if h.n_assets() != self.n_assets {
                    return Err(Error::Parameter(format!(
                        "explicit hyperparameters list {} assets but n_assets = {}",
                        h.n_assets(),
                        self.n_assets
                    )));
                }
            }
        }
        Ok(())
    }

    fn hyperparams_for(&self, trial: u64) -> Result<HyperParams> {
        match &self.hyper {
            HyperSource::Model(m) => sample_hyperparams(m, self.n_assets, seed::derive(self.seed, trial, HYPER_STREAM)),
            HyperSource::Explicit(p) => Ok(p.clone()),
        }
    }
}

/// Every grid point of one trial. A factorization failure fails the whole
/// trial; constraint failures are per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: u64,
    pub results: Vec<Result<TrialResult>>,
}

/// Runs one trial on every `R` of `r_grid`, sharing one factorization.
pub fn run_trial_grid(config: &ExperimentConfig, trial: u64, r_grid: &[f64]) -> Result<TrialOutcome> {
    let params = config.hyperparams_for(trial)?;
    let sample =
        generate_market(&params, config.n_periods()?, config.noise, seed::derive(config.seed, trial, NOISE_STREAM))?;
    let factored = match FactoredMarket::new(&sample, &params) {
        Ok(f) => f,
        Err(e) if e.is_numerical() => {
            return Ok(TrialOutcome { trial, results: r_grid.iter().map(|_| Err(e.clone())).collect() })
        }
        Err(e) => return Err(e),
    };
    let results = r_grid
        .iter()
        .map(|&r| {
            let w_or = solve_or_portfolio(&params, r)?;
            factored.evaluate(r, &w_or)
        })
        .collect();
    Ok(TrialOutcome { trial, results })
}

/// One trial at one return coefficient.
pub fn run_trial(config: &ExperimentConfig, trial: u64, r: f64) -> Result<TrialResult> {
    config.validate()?;
    run_trial_grid(config, trial, &[r])?.results.pop().expect("one grid point")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub r: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    /// False when every trial failed at this `R`.
    pub valid: bool,
    pub epsilon: Option<Estimate>,
    pub q_w: Option<Estimate>,
    pub sharpe: Option<Estimate>,
    pub epsilon_or: Option<Estimate>,
    pub expected_epsilon_or: Option<Estimate>,
    pub epsilon_prime: Option<Estimate>,
    pub q_w_or: Option<Estimate>,
    /// `mean(eps_OR) / mean(eps)`
    pub kappa_hat: Option<f64>,
    /// `mean(eps_OR / eps)`
    pub kappa_hat_ratio_mean: Option<f64>,
    /// `mean(eps') / mean(eps)`
    pub kappa_prime_hat: Option<f64>,
    pub kappa_prime_hat_ratio_mean: Option<f64>,
    /// Per-trial violations of `H(w_OR|X) >= H(w*|X)`.
    pub or_inequality_violations: usize,
    pub prediction: Option<ReplicaPrediction>,
}

/// Trial means of the normalized quadratic forms against their large-N limits
/// `<v^-1>/(alpha-1)`, `<v^-1 r>/(alpha-1)`, `<v^-1 r^2>/(alpha-1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub ee: Estimate,
    pub re: Estimate,
    pub rr: Estimate,
    pub ee_limit: f64,
    pub re_limit: f64,
    pub rr_limit: f64,
    pub r_star: Estimate,
    pub s_star: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub n_assets: usize,
    pub n_periods: usize,
    pub alpha: f64,
    pub n_trials: usize,
    pub seed: u64,
    pub noise: NoiseSpec,
    pub moments: MomentSet,
    pub sharpe_triple: Option<SharpeTriple>,
    /// Trials rejected by the factorization (singular or ill-conditioned `J`).
    pub failed_trials: usize,
    pub failure_messages: Vec<String>,
    pub rows: Vec<SummaryRow>,
    pub probes: Option<ProbeSummary>,
}

impl ExperimentSummary {
    pub fn total_inequality_violations(&self) -> usize {
        self.rows.iter().map(|r| r.or_inequality_violations).sum()
    }

    pub fn all_failed(&self) -> bool {
        self.rows.iter().all(|r| !r.valid)
    }
}

fn ratio(num: &Option<Estimate>, den: &Option<Estimate>) -> Option<f64> {
    match (num, den) {
        (Some(a), Some(b)) => Some(a.mean / b.mean),
        _ => None,
    }
}

fn mean_of(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = xs.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let alpha = config.alpha()?;
    let moments = config.hyper.moments()?;
    let trials: Vec<u64> = (0..config.n_trials as u64).collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    let outcomes: Vec<TrialOutcome> = pool.install(|| {
        trials.par_iter().map(|&t| run_trial_grid(config, t, &config.r_grid)).collect::<Result<Vec<_>>>()
    })?;

    let mut failed_trials = 0;
    let mut failure_messages = Vec::new();
    for o in &outcomes {
        if let Some(Err(e)) = o.results.first() {
            if o.results.iter().all(|r| r.is_err()) {
                failed_trials += 1;
                failure_messages.push(format!("trial {}: {e}", o.trial));
            }
        }
    }

    let rows = config
        .r_grid
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let ok: Vec<&TrialResult> = outcomes.iter().filter_map(|o| o.results[k].as_ref().ok()).collect();
            let collect =
                |f: fn(&TrialResult) -> f64| Estimate::from_samples(&ok.iter().map(|t| f(t)).collect::<Vec<_>>());
            let epsilon = collect(|t| t.epsilon);
            let epsilon_or = collect(|t| t.epsilon_or);
            let epsilon_prime = collect(|t| t.epsilon_prime);
            SummaryRow {
                r,
                n_ok: ok.len(),
                n_failed: outcomes.len() - ok.len(),
                valid: !ok.is_empty(),
                q_w: collect(|t| t.q_w),
                sharpe: collect(|t| t.sharpe),
                expected_epsilon_or: collect(|t| t.expected_epsilon_or),
                q_w_or: collect(|t| t.q_w_or),
                kappa_hat: ratio(&epsilon_or, &epsilon),
                kappa_hat_ratio_mean: mean_of(ok.iter().map(|t| t.epsilon_or / t.epsilon)),
                kappa_prime_hat: ratio(&epsilon_prime, &epsilon),
                kappa_prime_hat_ratio_mean: mean_of(ok.iter().map(|t| t.epsilon_prime / t.epsilon)),
                or_inequality_violations: ok.iter().filter(|t| t.epsilon_or < t.epsilon).count(),
                prediction: replica::predict(&moments, alpha, r).ok(),
                epsilon,
                epsilon_or,
                epsilon_prime,
            }
        })
        .collect();

    // Quadratic forms and the tangency portfolio do not depend on R; take
    // them from the first successful grid point of each trial.
    let firsts: Vec<&TrialResult> =
        outcomes.iter().filter_map(|o| o.results.iter().find_map(|r| r.as_ref().ok())).collect();
    let probes = (!firsts.is_empty()).then(|| {
        let est = |f: fn(&TrialResult) -> f64| {
            Estimate::from_samples(&firsts.iter().map(|t| f(t)).collect::<Vec<_>>()).expect("non-empty")
        };
        ProbeSummary {
            ee: est(|t| t.forms.ee),
            re: est(|t| t.forms.re),
            rr: est(|t| t.forms.rr),
            ee_limit: moments.m_v1 / (alpha - 1.0),
            re_limit: moments.m_v1r / (alpha - 1.0),
            rr_limit: moments.m_v1r2 / (alpha - 1.0),
            r_star: est(|t| t.r_star_emp),
            s_star: est(|t| t.s_star_emp),
        }
    });

    Ok(ExperimentSummary {
        n_assets: config.n_assets,
        n_periods: config.n_periods()?,
        alpha,
        n_trials: config.n_trials,
        seed: config.seed,
        noise: config.noise,
        moments,
        sharpe_triple: replica::sharpe_triple(&moments, alpha).ok(),
        failed_trials,
        failure_messages,
        rows,
        probes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperparams::{Coupling, Marginal};
    use crate::optimizer::quadratic_forms;

    fn small(n: usize, p: usize, m: usize) -> ExperimentConfig {
        ExperimentConfig { n_periods: Some(p), seed: 77, ..ExperimentConfig::pareto_reference(n, 2.0, m) }
    }

    #[test]
    fn trial_is_deterministic() {
        let cfg = small(50, 100, 1);
        let a = run_trial(&cfg, 3, 1.5).unwrap();
        let b = run_trial(&cfg, 3, 1.5).unwrap();
        assert_eq!(a, b);
        let c = run_trial(&cfg, 4, 1.5).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn point_mass_trial_is_budget_only() {
        let model = HyperModel {
            mean_dist: Marginal::PointMass { value: 1.2 },
            ratio_dist: Marginal::PointMass { value: 0.8 },
            coupling: Coupling::Independent,
        };
        let cfg = ExperimentConfig { hyper: HyperSource::Model(model), r_grid: vec![1.2], ..small(30, 60, 1) };
        let t = run_trial(&cfg, 0, 1.2).unwrap();
        let params = sample_hyperparams(&model, 30, seed::derive(cfg.seed, 0, HYPER_STREAM)).unwrap();
        let sample = generate_market(&params, 60, cfg.noise, seed::derive(cfg.seed, 0, NOISE_STREAM)).unwrap();
        let f = quadratic_forms(&sample, &params).unwrap();
        // N / (2 e'J^{-1}e) = 1 / (2 ee)
        assert!((t.epsilon - 0.5 / f.ee).abs() < 1e-12 * t.epsilon);
    }

    #[test]
    fn single_trial_has_no_error_bars() {
        let s = run_experiment(&small(20, 40, 1)).unwrap();
        let row = &s.rows[0];
        assert_eq!(row.epsilon.unwrap().std_err, None);
        assert_eq!(row.n_ok, 1);
        let t = run_trial(&small(20, 40, 1), 0, row.r).unwrap();
        assert_eq!(row.epsilon.unwrap().mean, t.epsilon);
    }

    #[test]
    fn parallel_matches_serial() {
        let serial = run_experiment(&ExperimentConfig { workers: 1, ..small(40, 80, 6) }).unwrap();
        let parallel = run_experiment(&ExperimentConfig { workers: 4, ..small(40, 80, 6) }).unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn invalid_configs() {
        assert!(run_experiment(&small(20, 20, 2)).is_err());
        assert!(run_experiment(&ExperimentConfig { r_grid: vec![], ..small(20, 40, 2) }).is_err());
        assert!(run_experiment(&ExperimentConfig { n_trials: 0, ..small(20, 40, 2) }).is_err());
    }

    #[test]
    fn infeasible_rows_marked_invalid() {
        let params = HyperParams::new(vec![1.0; 10], vec![1.0; 10]).unwrap();
        let cfg = ExperimentConfig { hyper: HyperSource::Explicit(params), r_grid: vec![1.0, 1.5], ..small(10, 25, 3) };
        let s = run_experiment(&cfg).unwrap();
        assert!(s.rows[0].valid);
        assert!(!s.rows[1].valid);
        assert_eq!(s.rows[1].n_failed, 3);
        assert!(s.rows[1].prediction.is_none());
        assert_eq!(s.failed_trials, 0);
    }
}
