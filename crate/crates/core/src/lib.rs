//! Typical-case minimal investment risk for mean-variance portfolios with
//! heterogeneous asset means and variances.
//!
//! The crate has two halves that are meant to be compared against each other:
//!
//! - [`replica`] evaluates the large-N closed forms for the minimal risk per
//!   asset, the investment concentration, the Sharpe ratio and the opportunity
//!   losses of the expected-risk (operations research) portfolio, all as
//!   functions of a [`MomentSet`] and the period ratio `alpha = p / N`.
//! - [`market`], [`optimizer`] and [`harness`] draw finite markets, solve the
//!   constrained quadratic program exactly and aggregate Monte Carlo statistics.
//!
//! [`hyperparams`] connects the two: it samples per-asset `(r_i, v_i)` and
//! computes the weighted moments, either as population integrals or as
//! finite-N averages.

pub mod error;
pub mod harness;
pub mod hyperparams;
pub mod linalg;
pub mod market;
pub mod optimizer;
pub mod replica;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
pub use harness::{
    run_experiment, run_trial, run_trial_grid, ExperimentConfig, ExperimentSummary, HyperSource, SummaryRow,
};
pub use hyperparams::{
    empirical_moments, population_moments, sample_bounded_pareto, sample_hyperparams, BoundedPareto, Coupling,
    HyperModel, HyperParams, Marginal, MomentSet,
};
pub use market::{generate_market, MarketSample, NoiseSpec};
pub use optimizer::{
    investment_risk, max_sharpe_portfolio, quadratic_forms, solve_min_risk, solve_or_portfolio, Portfolio,
    QuadraticForms, TrialResult,
};
pub use replica::{
    dual_return_bounds, epsilon_min, or_predictions, predict, q_w, sharpe, sharpe_at_infinity, sharpe_triple,
    OrPrediction, ReplicaPrediction, SharpeTriple,
};
