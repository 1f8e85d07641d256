mod check;
mod config;
mod error;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use replica_portfolio::replica::{budget_only_concentration, budget_only_risk};
use replica_portfolio::{
    dual_return_bounds, epsilon_min, generate_market, predict, q_w, run_experiment, sample_hyperparams, seed, sharpe,
    sharpe_triple, stats, Error, ExperimentSummary, HyperSource, MomentSet, SummaryRow,
};

use config::{Overrides, RunConfig};
use error::CliError;
use output::{num, opt, Csv, OutputDir};
use plot::{Marker, Panel, Series};

#[derive(Parser)]
#[command(name = "replica-portfolio", version, about = "Minimal-risk portfolios with a finite observation window")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form curves over the R grid and the scalar summary
    Predict,
    /// Monte Carlo experiment against the closed forms
    Simulate,
    /// Randomized identity and oracle checks
    Check {
        /// Perturb the risk by a relative 1e-6 so the identity checks must fail
        #[arg(long)]
        inject_fault: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli.overrides.resolve().and_then(|cfg| match cli.command {
        Command::Predict => cmd_predict(&cfg),
        Command::Simulate => cmd_simulate(&cfg),
        Command::Check { inject_fault } => run_check(&cfg, inject_fault),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

/// 201 points spanning the grid, for smooth curves.
fn dense_grid(grid: &[f64]) -> Vec<f64> {
    let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return vec![lo];
    }
    (0..=200).map(|i| lo + (hi - lo) * i as f64 / 200.0).collect()
}

fn r1_notes(m: &MomentSet) -> Vec<String> {
    if m.r1 <= 0.0 {
        vec![format!(
            "R1 = {} <= 0: the Sharpe-ratio maximizer R* is not a positive return and the Sharpe triple is reported as-is",
            m.r1
        )]
    } else {
        Vec::new()
    }
}

fn cmd_predict(cfg: &RunConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let exp = &cfg.experiment;
    let alpha = exp.alpha()?;
    let m = exp.hyper.moments()?;
    let mut out = OutputDir::create(&out_dir(cfg))?;
    let mut notes = r1_notes(&m);

    let mut csv = Csv::new(&["R", "epsilon", "q_w", "sharpe", "epsilon_or", "q_w_or"]);
    let mut preds = Vec::new();
    for &r in &exp.r_grid {
        let p = predict(&m, alpha, r)?;
        csv.row(vec![num(r), num(p.epsilon), num(p.q_w), num(p.sharpe), num(p.epsilon_or), num(p.q_w_or)]);
        preds.push(p);
    }
    out.write("predict.csv", csv.into_string().as_bytes())?;

    let mut scalars: Vec<(&str, f64)> = vec![
        ("alpha", alpha),
        ("R1", m.r1),
        ("V1", m.v1),
        ("kappa", alpha / (alpha - 1.0)),
        ("kappa_prime", (alpha / (alpha - 1.0)).powi(2)),
        ("epsilon_0", budget_only_risk(&m, alpha)?),
        ("q_w_0", budget_only_concentration(&m, alpha)?),
    ];
    match sharpe_triple(&m, alpha) {
        Ok(t) => scalars.extend([
            ("R_star", t.r_star),
            ("S_R_star", t.s_at_rstar),
            ("S_R1", t.s_at_r1),
            ("S_inf", t.s_at_inf),
            ("pythagorean_residual", t.pythagorean_residual()),
        ]),
        Err(e) => notes.push(format!("Sharpe triple unavailable: {e}")),
    }
    let mut csv = Csv::new(&["name", "value"]);
    for (k, v) in &scalars {
        csv.row(vec![k.to_string(), num(*v)]);
    }
    out.write("scalars.csv", csv.into_string().as_bytes())?;
    let json = serde_json::json!({
        "moments": m,
        "scalars": scalars.iter().map(|(k, v)| (k.to_string(), *v)).collect::<std::collections::BTreeMap<_, _>>(),
        "predictions": preds,
    });
    out.write_json("predict.json", &json)?;

    if !cfg.dual_epsilons.is_empty() {
        let mut csv = Csv::new(&["epsilon", "r_max", "r_min"]);
        for &eps in &cfg.dual_epsilons {
            match dual_return_bounds(&m, alpha, eps) {
                Ok((hi, lo)) => csv.row(vec![num(eps), num(hi), num(lo)]),
                Err(e @ Error::RiskBelowFloor { .. }) => {
                    notes.push(format!("dual.csv: {e}; bounds left empty"));
                    csv.row(vec![num(eps), String::new(), String::new()]);
                }
                Err(e) => return Err(e.into()),
            }
        }
        out.write("dual.csv", csv.into_string().as_bytes())?;
    }

    if cfg.plot {
        let svg = plot::render(&curve_panels(&m, alpha, &exp.r_grid, None)?);
        out.write("predict.svg", svg.as_bytes())?;
    }
    let path = out.finish("predict", cfg, vec![("total", start.elapsed())], notes)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Risk, concentration and Sharpe panels with dense closed-form curves and,
/// when given, simulated means with standard-error bars.
fn curve_panels(
    m: &MomentSet,
    alpha: f64,
    grid: &[f64],
    sim: Option<&ExperimentSummary>,
) -> Result<Vec<Panel>, CliError> {
    let dense = dense_grid(grid);
    let curve = |f: &dyn Fn(f64) -> replica_portfolio::Result<f64>| -> Result<Series, CliError> {
        Ok(Series { points: dense.iter().map(|&r| f(r).map(|y| (r, y))).collect::<replica_portfolio::Result<_>>()? })
    };
    let markers = |pick: fn(&SummaryRow) -> Option<stats::Estimate>| -> Vec<Marker> {
        sim.map(|s| {
            s.rows.iter().filter_map(|row| pick(row).map(|e| Marker { x: row.r, y: e.mean, err: e.std_err })).collect()
        })
        .unwrap_or_default()
    };
    let s_max = sharpe_triple(m, alpha).ok().map(|t| t.s_at_rstar);
    Ok(vec![
        Panel {
            title: "minimal risk per asset".into(),
            curve: curve(&|r| epsilon_min(m, alpha, r))?,
            markers: markers(|row| row.epsilon),
            reference: Some(budget_only_risk(m, alpha)?),
        },
        Panel {
            title: "concentration q_w".into(),
            curve: curve(&|r| q_w(m, alpha, r))?,
            markers: markers(|row| row.q_w),
            reference: Some(budget_only_concentration(m, alpha)?),
        },
        Panel {
            title: "Sharpe ratio".into(),
            curve: curve(&|r| sharpe(m, alpha, r))?,
            markers: markers(|row| row.sharpe),
            reference: s_max,
        },
    ])
}

fn cmd_simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let exp = &cfg.experiment;
    let mut out = OutputDir::create(&out_dir(cfg))?;
    let summary = run_experiment(exp)?;
    let sim_time = start.elapsed();

    let header = [
        "R",
        "n_ok",
        "n_failed",
        "epsilon_mean",
        "epsilon_se",
        "epsilon_pred",
        "q_w_mean",
        "q_w_se",
        "q_w_pred",
        "sharpe_mean",
        "sharpe_se",
        "sharpe_pred",
        "epsilon_or_mean",
        "epsilon_or_se",
        "epsilon_or_pred",
        "epsilon_prime_mean",
        "epsilon_prime_se",
        "epsilon_prime_pred",
        "q_w_or_mean",
        "q_w_or_se",
        "q_w_or_pred",
        "kappa_hat",
        "kappa_prime_hat",
        "or_inequality_violations",
    ];
    let mut csv = Csv::new(&header);
    for row in &summary.rows {
        let p = row.prediction;
        let mut fields = vec![num(row.r), row.n_ok.to_string(), row.n_failed.to_string()];
        let cols: [(Option<stats::Estimate>, Option<f64>); 6] = [
            (row.epsilon, p.map(|p| p.epsilon)),
            (row.q_w, p.map(|p| p.q_w)),
            (row.sharpe, p.map(|p| p.sharpe)),
            (row.epsilon_or, p.map(|p| p.epsilon_or)),
            (row.epsilon_prime, p.map(|p| p.epsilon_prime)),
            (row.q_w_or, p.map(|p| p.q_w_or)),
        ];
        for (est, pred) in cols {
            fields.push(opt(est.map(|e| e.mean)));
            fields.push(opt(est.and_then(|e| e.std_err)));
            fields.push(opt(pred));
        }
        fields.extend([opt(row.kappa_hat), opt(row.kappa_prime_hat), row.or_inequality_violations.to_string()]);
        csv.row(fields);
    }
    out.write("summary.csv", csv.into_string().as_bytes())?;
    out.write_json("summary.json", &summary)?;

    if cfg.plot {
        let svg = plot::render(&curve_panels(&summary.moments, summary.alpha, &exp.r_grid, Some(&summary))?);
        out.write("curves.svg", svg.as_bytes())?;
    }
    if cfg.dump_x {
        let params = match &exp.hyper {
            HyperSource::Model(model) => {
                sample_hyperparams(model, exp.n_assets, seed::derive(exp.seed, 0, seed::HYPER_STREAM))?
            }
            HyperSource::Explicit(p) => p.clone(),
        };
        let sample =
            generate_market(&params, summary.n_periods, exp.noise, seed::derive(exp.seed, 0, seed::NOISE_STREAM))?;
        sample.write_dump(out.path("x_trial0.bin"))?;
        out.register("x_trial0.bin")?;
    }

    let mut notes = r1_notes(&summary.moments);
    notes.push(format!("noise: {}; the closed forms assume Gaussian returns", summary.noise.name()));
    notes.push("error bars and *_se columns are standard errors of the trial mean (s / sqrt(M))".into());
    notes.push(format!("{} of {} trials rejected by the factorization", summary.failed_trials, summary.n_trials));
    notes.extend(summary.failure_messages.iter().cloned());
    let violations = summary.total_inequality_violations();
    if violations > 0 {
        notes.push(format!("{violations} trial-grid points with H(w_OR|X) < H(w*|X)"));
    }
    let path = out.finish("simulate", cfg, vec![("simulate", sim_time), ("total", start.elapsed())], notes)?;
    println!("wrote {}", path.display());

    if summary.all_failed() {
        return Err(CliError::Numerical(format!("all {} trials failed", summary.n_trials)));
    }
    Ok(())
}

fn run_check(cfg: &RunConfig, inject_fault: bool) -> Result<(), CliError> {
    let start = Instant::now();
    let exp = &cfg.experiment;
    let results = check::run(&exp.hyper.moments()?, exp.alpha()?, exp.seed, inject_fault);
    print!("{}", check::table(&results));
    if let Some(dir) = &cfg.out {
        let mut out = OutputDir::create(dir)?;
        let mut csv = Csv::new(&["check", "passed", "residual", "tolerance", "cases"]);
        for r in &results {
            csv.row(vec![
                format!("\"{}\"", r.name),
                r.passed.to_string(),
                num(r.residual),
                num(r.tolerance),
                r.cases.to_string(),
            ]);
        }
        out.write("check.csv", csv.into_string().as_bytes())?;
        let notes = if inject_fault {
            vec![format!("fault injected: risk scaled by 1 + {}", check::FAULT_SIZE)]
        } else {
            Vec::new()
        };
        out.finish("check", cfg, vec![("total", start.elapsed())], notes)?;
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::CheckFailed(failed));
    }
    Ok(())
}
