//! Acceptance gate: one line per criterion, non-zero exit if any fails.
//!
//! Runs the full N=1000, p=2000, M=100 experiment, so build with
//! optimizations (the workspace test profile does).

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use replica_portfolio::*;

const SEED: u64 = 1;

struct Gate {
    failures: usize,
}

impl Gate {
    fn report(&mut self, id: &str, pass: bool, detail: String) {
        println!("[{}] {id}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failures += 1;
        }
    }
}

/// Every grid row has mean epsilon, q_w and S within `k` standard errors of
/// the closed forms. Returns the worst z-score and the violations.
fn curve_check(s: &ExperimentSummary, k: f64) -> (f64, Vec<String>) {
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for row in &s.rows {
        let Some(p) = row.prediction else {
            bad.push(format!("R={} has no prediction", row.r));
            continue;
        };
        for (name, est, target) in
            [("eps", row.epsilon, p.epsilon), ("q_w", row.q_w, p.q_w), ("S", row.sharpe, p.sharpe)]
        {
            match est.and_then(|e| e.z_score(target)) {
                Some(z) => {
                    worst = worst.max(z);
                    if z > k {
                        bad.push(format!("{name}@R={:.2} z={z:.2}", row.r));
                    }
                }
                None => bad.push(format!("{name}@R={:.2} missing", row.r)),
            }
        }
    }
    (worst, bad)
}

fn run(cfg: &ExperimentConfig) -> (ExperimentSummary, Duration) {
    let t = Instant::now();
    let s = run_experiment(cfg).expect("experiment runs");
    (s, t.elapsed())
}

fn main() -> ExitCode {
    let mut gate = Gate { failures: 0 };
    let mut all_runs: Vec<(String, ExperimentSummary)> = Vec::new();

    // 1. Risk, concentration and Sharpe curves, smoke and full scale.
    let smoke_cfg =
        ExperimentConfig { n_periods: Some(400), seed: SEED, ..ExperimentConfig::pareto_reference(200, 2.0, 20) };
    let (smoke, smoke_time) = run(&smoke_cfg);
    let (worst, bad) = curve_check(&smoke, 3.0);
    gate.report(
        "C1a curves smoke N=200 p=400 M=20",
        bad.is_empty() && smoke.failed_trials == 0 && smoke_time < Duration::from_secs(60),
        format!("worst z={worst:.2} (<= 3), {} violations {bad:?}, {:.2?}", bad.len(), smoke_time),
    );
    let full_cfg =
        ExperimentConfig { n_periods: Some(2000), seed: SEED, ..ExperimentConfig::pareto_reference(1000, 2.0, 100) };
    let (full, full_time) = run(&full_cfg);
    let (worst, bad) = curve_check(&full, 3.0);
    gate.report(
        "C1b curves full N=1000 p=2000 M=100",
        bad.is_empty() && full.failed_trials == 0,
        format!("worst z={worst:.2} (<= 3), {} violations {bad:?}, {:.2?}", bad.len(), full_time),
    );

    // 2. Pythagorean theorem of the Sharpe ratio.
    let t = Instant::now();
    let mut rng = common::rng(SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let m = common::random_moments(&mut rng);
        let alpha = rng.random_range(1.05..10.0);
        let triple = sharpe_triple(&m, alpha).expect("R1 != 0");
        worst = worst.max(triple.pythagorean_residual().abs());
    }
    let elapsed = t.elapsed();
    gate.report(
        "C2 pythagorean identity (1000 moment sets)",
        worst <= 1e-12 && elapsed < Duration::from_secs(1),
        format!("max relative residual {worst:.3e} (<= 1e-12), {elapsed:.2?}"),
    );

    // 3. Opportunity losses at alpha = 2.
    let kappa_cfg =
        ExperimentConfig { n_periods: Some(1000), seed: SEED, ..ExperimentConfig::pareto_reference(500, 2.0, 50) };
    let (kappa_run, _) = run(&kappa_cfg);
    let (mut dk, mut dkp) = (0.0f64, 0.0f64);
    let mut analytic_exact = true;
    for row in &kappa_run.rows {
        dk = dk.max((row.kappa_hat.unwrap_or(f64::NAN) / 2.0 - 1.0).abs());
        dkp = dkp.max((row.kappa_prime_hat.unwrap_or(f64::NAN) / 4.0 - 1.0).abs());
        let p = row.prediction.expect("prediction");
        analytic_exact &= p.kappa == 2.0 && p.kappa_prime == 4.0;
    }
    gate.report(
        "C3 opportunity losses N=500 M=50",
        dk <= 0.02 && dkp <= 0.05 && analytic_exact,
        format!("max |kappa_hat/2-1|={dk:.4} (<= 0.02), max |kappa'_hat/4-1|={dkp:.4} (<= 0.05), analytic exact: {analytic_exact}"),
    );
    all_runs.push(("C3".into(), kappa_run));

    // 4. Duality roundtrip.
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let m = common::random_moments(&mut rng);
        let alpha = rng.random_range(1.05..10.0);
        let r = m.r1 + rng.random_range(0.01..5.0) * m.v1.sqrt();
        let eps = epsilon_min(&m, alpha, r).unwrap();
        let (hi, _) = dual_return_bounds(&m, alpha, eps).unwrap();
        worst = worst.max(((hi - r) / r).abs());
    }
    gate.report(
        "C4 duality roundtrip (1000 cases)",
        worst <= 1e-10,
        format!("max relative error {worst:.3e} (<= 1e-10)"),
    );

    // 5. Oracle equivalence at N=5, p=10.
    let model = HyperModel::pareto_product((1.0, 2.0, 2.0), (1.0, 2.0, 2.0)).unwrap();
    let (mut worst_min, mut worst_or) = (0.0f64, 0.0f64);
    for k in 0..100u64 {
        let params = sample_hyperparams(&model, 5, seed::derive(SEED, k, 0)).unwrap();
        let sample = generate_market(&params, 10, NoiseSpec::Gaussian, seed::derive(SEED, k, 1)).unwrap();
        let r = rng.random_range(1.0..2.0);
        let (w, _, _) = solve_min_risk(&sample, &params, r).unwrap();
        let oracle = common::kkt_oracle(&sample.j, &params.means, r);
        worst_min = w.weights.iter().zip(&oracle).fold(worst_min, |a, (x, y)| a.max((x - y).abs()));
        let w_or = solve_or_portfolio(&params, r).unwrap();
        let q = DMatrix::from_diagonal(&DVector::from_column_slice(&params.variances));
        let oracle = common::kkt_oracle(&q, &params.means, r);
        worst_or = w_or.weights.iter().zip(&oracle).fold(worst_or, |a, (x, y)| a.max((x - y).abs()));
    }
    gate.report(
        "C5 KKT oracle equivalence (100 instances)",
        worst_min <= 1e-8 && worst_or <= 1e-8,
        format!("max weight error min-risk {worst_min:.3e}, OR {worst_or:.3e} (<= 1e-8)"),
    );

    // 6. Quadratic-form probes.
    let single = run_trial(&full_cfg, 0, full_cfg.r_grid[0]).unwrap().forms;
    let probes = full.probes.clone().expect("probes");
    let rel = |x: f64, y: f64| (x / y - 1.0).abs();
    let single_dev =
        [rel(single.ee, probes.ee_limit), rel(single.re, probes.re_limit), rel(single.rr, probes.rr_limit)];
    let z =
        [probes.ee.z_score(probes.ee_limit), probes.re.z_score(probes.re_limit), probes.rr.z_score(probes.rr_limit)]
            .map(|z| z.unwrap_or(f64::INFINITY));
    gate.report(
        "C6 J^-1 quadratic forms N=1000 alpha=2",
        single_dev.iter().all(|d| *d <= 0.05) && z.iter().all(|z| *z <= 3.0),
        format!(
            "single-trial rel dev ee/re/rr = {:.4}/{:.4}/{:.4} (<= 0.05); M=100 z = {:.2}/{:.2}/{:.2} (<= 3)",
            single_dev[0], single_dev[1], single_dev[2], z[0], z[1], z[2]
        ),
    );

    // 8. Uniform-variance special case.
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let s2 = rng.random_range(0.1..4.0);
        let m = rng.random_range(-1.0..3.0);
        let sigma = rng.random_range(0.05..2.0);
        let alpha = rng.random_range(1.1..5.0);
        let r = m + rng.random_range(-3.0..3.0) * sigma;
        let model = HyperModel {
            mean_dist: Marginal::TwoPoint { low: m - sigma, high: m + sigma },
            ratio_dist: Marginal::PointMass { value: s2 },
            coupling: Coupling::Independent,
        };
        let mom = population_moments(&model).unwrap();
        let g = 1.0 + (r - m).powi(2) / (sigma * sigma);
        let eps = s2 * (alpha - 1.0) / 2.0 * g;
        let qw = alpha / (alpha - 1.0) * g;
        worst = worst.max(rel(epsilon_min(&mom, alpha, r).unwrap(), eps)).max(rel(q_w(&mom, alpha, r).unwrap(), qw));
    }
    gate.report(
        "C8 uniform-variance reduction (200 cases)",
        worst <= 1e-12,
        format!("max relative error {worst:.3e} (<= 1e-12)"),
    );

    // 9. Noise universality at smoke scale.
    for noise in [NoiseSpec::Uniform, NoiseSpec::Rademacher] {
        let cfg = ExperimentConfig { noise, ..smoke_cfg.clone() };
        let (s, elapsed) = run(&cfg);
        let (worst, bad) = curve_check(&s, 3.0);
        gate.report(
            &format!("C9 universality ({})", noise.name()),
            bad.is_empty() && s.failed_trials == 0,
            format!("worst z={worst:.2} (<= 3), {} violations {bad:?}, {elapsed:.2?}", bad.len()),
        );
        all_runs.push((format!("C9 {}", noise.name()), s));
    }

    // 7. min E >= E min on every non-failed trial of every run above.
    all_runs.push(("C1a".into(), smoke));
    all_runs.push(("C1b".into(), full));
    let checked: usize = all_runs.iter().flat_map(|(_, s)| s.rows.iter().map(|r| r.n_ok)).sum();
    let violations: usize = all_runs.iter().map(|(_, s)| s.total_inequality_violations()).sum();
    gate.report(
        "C7 H(w_OR|X) >= H(w*|X) across all runs",
        violations == 0 && checked > 0,
        format!("{violations} violations in {checked} trial-grid points"),
    );

    if gate.failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", gate.failures);
        ExitCode::FAILURE
    }
}
