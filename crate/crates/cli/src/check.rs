//! Identity and oracle suite behind `replica-portfolio check`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use replica_portfolio::optimizer::FactoredMarket;
use replica_portfolio::replica::budget_only_risk;
use replica_portfolio::*;
use serde::Serialize;

/// Relative perturbation applied to the risk by `--inject-fault`.
pub const FAULT_SIZE: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
    pub cases: usize,
}

struct Suite {
    results: Vec<CheckResult>,
}

impl Suite {
    fn record(&mut self, name: &str, residual: f64, tolerance: f64, cases: usize) {
        self.results.push(CheckResult {
            name: name.to_string(),
            passed: residual <= tolerance,
            residual,
            tolerance,
            cases,
        });
    }
}

fn random_moments(rng: &mut ChaCha8Rng) -> MomentSet {
    let m_v1 = 10f64.powf(rng.random_range(-2.0..2.0));
    let m_v2 = 10f64.powf(rng.random_range(-2.0..2.0));
    let r1 = rng.random_range(-3.0..3.0);
    let r2 = rng.random_range(-3.0..3.0);
    let v1 = 10f64.powf(rng.random_range(-3.0..1.0));
    let v2 = 10f64.powf(rng.random_range(-3.0..1.0));
    MomentSet::from_raw(m_v1, m_v1 * r1, m_v1 * (v1 + r1 * r1), m_v2, m_v2 * r2, m_v2 * (v2 + r2 * r2))
        .expect("valid by construction")
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// `(N+2) x (N+2)` KKT solve of `min (1/2) w'Qw` under both constraints.
fn kkt(q: &DMatrix<f64>, means: &[f64], r: f64) -> Option<Vec<f64>> {
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
    a.lu().solve(&b).map(|s| s.rows(0, n).iter().copied().collect())
}

pub fn run(model_moments: &MomentSet, alpha: f64, seed: u64, inject_fault: bool) -> Vec<CheckResult> {
    let mut suite = Suite { results: Vec::new() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fault = if inject_fault { 1.0 + FAULT_SIZE } else { 1.0 };
    // Sharpe ratio through the risk route, S = R / sqrt(2 eps).
    let sharpe_via_risk =
        |m: &MomentSet, a: f64, r: f64| r / (2.0 * epsilon_min(m, a, r).expect("feasible") * fault).sqrt();

    let mut sets: Vec<(MomentSet, f64)> = (0..1000)
        .map(|_| {
            let m = random_moments(&mut rng);
            (m, rng.random_range(1.05..10.0))
        })
        .collect();
    sets.push((*model_moments, alpha));

    let worst = sets.iter().fold(0.0f64, |acc, (m, a)| {
        let t = sharpe_triple(m, *a).expect("R1 != 0");
        let hyp = sharpe_via_risk(m, *a, t.r_star).powi(2);
        acc.max((hyp - t.s_at_r1.powi(2) - t.s_at_inf.powi(2)).abs() / hyp)
    });
    suite.record("pythagorean S^2(R*) = S^2(R1) + S^2(inf)", worst, 1e-12, sets.len());

    let worst = sets.iter().fold(0.0f64, |acc, (m, a)| {
        let r = m.r1 + rng.random_range(-3.0..3.0) * m.v1.sqrt();
        let o = or_predictions(m, *a, r).expect("feasible");
        let k = a / (a - 1.0);
        acc.max(rel(o.kappa, k)).max(rel(o.kappa_prime, k * k))
    });
    suite.record("opportunity losses kappa, kappa' depend only on alpha", worst, 0.0, sets.len());

    let worst = sets.iter().fold(0.0f64, |acc, (m, a)| {
        let d = rng.random_range(0.01..5.0) * m.v1.sqrt();
        let (up, down) = (m.r1 + d, m.r1 - d);
        let (hi, _) = dual_return_bounds(m, *a, epsilon_min(m, *a, up).unwrap() * fault).unwrap();
        let (_, lo) = dual_return_bounds(m, *a, epsilon_min(m, *a, down).unwrap() * fault).unwrap();
        acc.max((hi - up).abs() / up.abs().max(d)).max((lo - down).abs() / down.abs().max(d))
    });
    suite.record("dual bounds recover R from eps(R)", worst, 1e-10, sets.len());

    let worst = sets.iter().fold(0.0f64, |acc, (m, a)| {
        let d = rng.random_range(0.01..3.0) * m.v1.sqrt();
        let floor = epsilon_min(m, *a, m.r1).unwrap();
        let (p, q) = (epsilon_min(m, *a, m.r1 + d).unwrap(), epsilon_min(m, *a, m.r1 - d).unwrap());
        let convex = if p > floor && q > floor { 0.0 } else { 1.0 };
        acc.max(rel(p, q)).max(convex).max(rel(floor, budget_only_risk(m, *a).unwrap()))
    });
    suite.record("eps(R) symmetric about its minimizer R1", worst, 1e-9, sets.len());

    let worst = sets.iter().fold(0.0f64, |acc, (m, a)| {
        let c = 10f64.powf(rng.random_range(-1.0..1.0));
        let r = m.r1 + rng.random_range(-2.0..2.0) * m.v1.sqrt();
        let ms = m.scale_variances(c);
        let e = rel(epsilon_min(&ms, *a, r).unwrap(), c * epsilon_min(m, *a, r).unwrap());
        let s = rel(sharpe(&ms, *a, r).unwrap(), sharpe(m, *a, r).unwrap() / c.sqrt());
        let t = rel(sharpe_triple(&ms, *a).unwrap().r_star, sharpe_triple(m, *a).unwrap().r_star);
        acc.max(e).max(s).max(t)
    });
    suite.record("variance scaling: eps x c, S / sqrt(c), R* fixed", worst, 1e-12, sets.len());

    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (s2, m, sigma) = (rng.random_range(0.1..4.0), rng.random_range(-1.0..3.0), rng.random_range(0.05..2.0));
        let a = rng.random_range(1.1..5.0);
        let r = m + rng.random_range(-3.0..3.0) * sigma;
        let model = HyperModel {
            mean_dist: Marginal::TwoPoint { low: m - sigma, high: m + sigma },
            ratio_dist: Marginal::PointMass { value: s2 },
            coupling: Coupling::Independent,
        };
        let mom = population_moments(&model).expect("valid model");
        let g = 1.0 + (r - m).powi(2) / (sigma * sigma);
        worst = worst
            .max(rel(epsilon_min(&mom, a, r).unwrap() * fault, s2 * (a - 1.0) / 2.0 * g))
            .max(rel(q_w(&mom, a, r).unwrap(), a / (a - 1.0) * g));
    }
    suite.record("uniform-variance reduction of eps and q_w", worst, 1e-12, 200);

    // Small exact instances against the generic KKT solve.
    let model = HyperModel::pareto_product((1.0, 2.0, 2.0), (1.0, 2.0, 2.0)).expect("valid");
    let (mut w_err, mut or_err, mut mult, mut cs, mut ineq, mut dom) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut cases = 0;
    for k in 0..100u64 {
        let params = sample_hyperparams(&model, 5, seed::derive(seed, k, seed::HYPER_STREAM)).expect("valid");
        let sample = generate_market(&params, 10, NoiseSpec::Gaussian, seed::derive(seed, k, seed::NOISE_STREAM))
            .expect("p > N");
        let Ok(fm) = FactoredMarket::new(&sample, &params) else { continue };
        cases += 1;
        let r = rng.random_range(1.0..2.0);
        let (w, kk, th) = fm.min_risk(r).expect("non-collinear");
        let oracle = kkt(&sample.j, &params.means, r).expect("nonsingular KKT");
        w_err = w.weights.iter().zip(&oracle).fold(w_err, |e, (x, y)| e.max((x - y).abs()));
        let w_or = solve_or_portfolio(&params, r).expect("feasible");
        let q = DMatrix::from_diagonal(&DVector::from_column_slice(&params.variances));
        let oracle = kkt(&q, &params.means, r).expect("nonsingular KKT");
        or_err = w_or.weights.iter().zip(&oracle).fold(or_err, |e, (x, y)| e.max((x - y).abs()));
        let direct = investment_risk(&sample, &w) / 5.0;
        mult = mult.max(rel(0.5 * (kk + r * th), direct));
        let f = fm.forms();
        cs = cs.max((f.re * f.re - f.ee * f.rr).max(0.0) / (f.ee * f.rr));
        let h_or = investment_risk(&sample, &w_or);
        ineq = ineq.max((investment_risk(&sample, &w) - h_or).max(0.0) / h_or);
        let (_, _, s_star) = fm.max_sharpe().expect("re != 0");
        dom = dom.max(r / (2.0 * direct).sqrt() - s_star);
    }
    suite.record("min-risk weights vs KKT oracle (N=5, p=10)", w_err, 1e-8, cases);
    suite.record("expected-risk weights vs KKT oracle (N=5)", or_err, 1e-8, cases);
    suite.record("multiplier identity eps = (k + R theta)/2", mult, 1e-8, cases);
    suite.record("Cauchy-Schwarz re^2 <= ee rr", cs, 1e-12, cases);
    suite.record("H(w_OR|X) >= H(w*|X)", ineq, 0.0, cases);
    suite.record("Sharpe dominance S(R) <= S(R*)", dom.max(0.0), 1e-10, cases);

    suite.results
}

pub fn table(results: &[CheckResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(10);
    let mut s = format!("{:<6} {:<width$} {:>12} {:>10} {:>6}\n", "status", "check", "residual", "tolerance", "cases");
    for r in results {
        s.push_str(&format!(
            "{:<6} {:<width$} {:>12.3e} {:>10.1e} {:>6}\n",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.residual,
            r.tolerance,
            r.cases
        ));
    }
    s
}
