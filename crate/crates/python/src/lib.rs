//! Python module `replica_portfolio`.
//!
//! Invalid inputs raise `ValueError`; factorization and conditioning
//! failures raise `ArithmeticError`.

use nalgebra::DMatrix;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use replica_portfolio as rp;

fn py_err(e: rp::Error) -> PyErr {
    if e.is_numerical() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

/// Builds a sample from an `N x p` nested list of already scaled returns.
fn sample_from_rows(rows: &[Vec<f64>]) -> PyResult<rp::MarketSample> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if n == 0 || p == 0 || rows.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("returns must be a non-empty rectangular N x p list"));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(rp::MarketSample::from_returns(DMatrix::from_row_slice(n, p, &flat)))
}

/// Weighted moments of the `(r, v)` distribution.
#[pyclass(name = "MomentSet", frozen, get_all)]
struct PyMomentSet {
    m_v1: f64,
    m_v1r: f64,
    m_v1r2: f64,
    m_v2: f64,
    m_v2r: f64,
    m_v2r2: f64,
    r1: f64,
    r2: f64,
    v1: f64,
    v2: f64,
}

impl From<rp::MomentSet> for PyMomentSet {
    fn from(m: rp::MomentSet) -> Self {
        PyMomentSet {
            m_v1: m.m_v1,
            m_v1r: m.m_v1r,
            m_v1r2: m.m_v1r2,
            m_v2: m.m_v2,
            m_v2r: m.m_v2r,
            m_v2r2: m.m_v2r2,
            r1: m.r1,
            r2: m.r2,
            v1: m.v1,
            v2: m.v2,
        }
    }
}

impl PyMomentSet {
    fn inner(&self) -> rp::MomentSet {
        rp::MomentSet::from_raw(self.m_v1, self.m_v1r, self.m_v1r2, self.m_v2, self.m_v2r, self.m_v2r2)
            .expect("validated on construction")
    }
}

#[pymethods]
impl PyMomentSet {
    /// From the six raw averages `<v^-1>, <v^-1 r>, <v^-1 r^2>, <v^-2>, <v^-2 r>, <v^-2 r^2>`.
    #[staticmethod]
    fn from_raw(m_v1: f64, m_v1r: f64, m_v1r2: f64, m_v2: f64, m_v2r: f64, m_v2r2: f64) -> PyResult<Self> {
        rp::MomentSet::from_raw(m_v1, m_v1r, m_v1r2, m_v2, m_v2r, m_v2r2).map(Into::into).map_err(py_err)
    }

    fn c_of(&self, r: f64) -> f64 {
        self.inner().c_of(r)
    }

    fn __repr__(&self) -> String {
        format!("MomentSet(m_v1={}, r1={}, v1={}, r2={}, v2={})", self.m_v1, self.r1, self.v1, self.r2, self.v2)
    }
}

/// Population moments for bounded Pareto `r` and `h` with `v = h r^2`.
/// Each distribution is `(lower, upper, power)`.
#[pyfunction]
fn pareto_moments(mean_dist: (f64, f64, f64), ratio_dist: (f64, f64, f64)) -> PyResult<PyMomentSet> {
    let model = rp::HyperModel::pareto_product(mean_dist, ratio_dist).map_err(py_err)?;
    rp::population_moments(&model).map(Into::into).map_err(py_err)
}

#[pyfunction]
fn empirical_moments(means: Vec<f64>, variances: Vec<f64>) -> PyResult<PyMomentSet> {
    let p = rp::HyperParams::new(means, variances).map_err(py_err)?;
    rp::empirical_moments(&p).map(Into::into).map_err(py_err)
}

#[pyfunction]
fn epsilon_min(moments: &PyMomentSet, alpha: f64, r: f64) -> PyResult<f64> {
    rp::epsilon_min(&moments.inner(), alpha, r).map_err(py_err)
}

#[pyfunction]
fn q_w(moments: &PyMomentSet, alpha: f64, r: f64) -> PyResult<f64> {
    rp::q_w(&moments.inner(), alpha, r).map_err(py_err)
}

#[pyfunction]
fn sharpe(moments: &PyMomentSet, alpha: f64, r: f64) -> PyResult<f64> {
    rp::sharpe(&moments.inner(), alpha, r).map_err(py_err)
}

/// Every closed-form quantity at one `R`, as a dict.
#[pyfunction]
fn predict<'py>(py: Python<'py>, moments: &PyMomentSet, alpha: f64, r: f64) -> PyResult<Bound<'py, PyDict>> {
    let p = rp::predict(&moments.inner(), alpha, r).map_err(py_err)?;
    let d = PyDict::new(py);
    for (k, v) in [
        ("alpha", p.alpha),
        ("r", p.r),
        ("epsilon", p.epsilon),
        ("q_w", p.q_w),
        ("sharpe", p.sharpe),
        ("q_s", p.q_s),
        ("epsilon_prime", p.epsilon_prime),
        ("epsilon_or", p.epsilon_or),
        ("q_w_or", p.q_w_or),
        ("kappa", p.kappa),
        ("kappa_prime", p.kappa_prime),
    ] {
        d.set_item(k, v)?;
    }
    Ok(d)
}

/// `(r_star, s_at_rstar, s_at_r1, s_at_inf)`.
#[pyfunction]
fn sharpe_triple(moments: &PyMomentSet, alpha: f64) -> PyResult<(f64, f64, f64, f64)> {
    let t = rp::sharpe_triple(&moments.inner(), alpha).map_err(py_err)?;
    Ok((t.r_star, t.s_at_rstar, t.s_at_r1, t.s_at_inf))
}

/// `(r_max, r_min)` attainable at risk `epsilon`.
#[pyfunction]
fn dual_return_bounds(moments: &PyMomentSet, alpha: f64, epsilon: f64) -> PyResult<(f64, f64)> {
    rp::dual_return_bounds(&moments.inner(), alpha, epsilon).map_err(py_err)
}

/// `n` draws from a bounded Pareto law, reproducible for a given seed.
#[pyfunction]
fn sample_bounded_pareto(lower: f64, upper: f64, power: f64, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    let dist = rp::Marginal::BoundedPareto(rp::BoundedPareto::new(lower, upper, power).map_err(py_err)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| dist.sample(&mut rng)).collect())
}

/// Scaled returns `x[i][mu] = sqrt(v_i) xi / sqrt(N)` as an `N x p` list.
#[pyfunction]
#[pyo3(signature = (means, variances, n_periods, seed, noise = "gaussian"))]
fn generate_market(
    means: Vec<f64>,
    variances: Vec<f64>,
    n_periods: usize,
    seed: u64,
    noise: &str,
) -> PyResult<Vec<Vec<f64>>> {
    let params = rp::HyperParams::new(means, variances).map_err(py_err)?;
    let noise: rp::NoiseSpec = noise.parse().map_err(|e| PyValueError::new_err(format!("{e}")))?;
    let s = rp::generate_market(&params, n_periods, noise, seed).map_err(py_err)?;
    Ok(s.x.row_iter().map(|row| row.iter().copied().collect()).collect())
}

/// Minimal in-sample risk portfolio for scaled returns `x` (`N x p`).
/// Returns `(weights, epsilon, k, theta)` with `epsilon` the risk per asset.
#[pyfunction]
fn solve_min_risk(
    x: Vec<Vec<f64>>,
    means: Vec<f64>,
    variances: Vec<f64>,
    r: f64,
) -> PyResult<(Vec<f64>, f64, f64, f64)> {
    let sample = sample_from_rows(&x)?;
    let params = rp::HyperParams::new(means, variances).map_err(py_err)?;
    let (w, k, theta) = rp::solve_min_risk(&sample, &params, r).map_err(py_err)?;
    let eps = rp::investment_risk(&sample, &w) / sample.n_assets as f64;
    Ok((w.weights, eps, k, theta))
}

/// Minimizer of the expected risk; needs no return data.
#[pyfunction]
fn solve_or_portfolio(means: Vec<f64>, variances: Vec<f64>, r: f64) -> PyResult<Vec<f64>> {
    let params = rp::HyperParams::new(means, variances).map_err(py_err)?;
    rp::solve_or_portfolio(&params, r).map(|p| p.weights).map_err(py_err)
}

/// Runs an experiment described by a JSON config and returns the summary as JSON.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg: rp::ExperimentConfig =
        serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let summary = py.detach(|| rp::run_experiment(&cfg)).map_err(py_err)?;
    serde_json::to_string(&summary).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
#[pyo3(name = "replica_portfolio")]
fn init(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyMomentSet>()?;
    m.add_function(wrap_pyfunction!(pareto_moments, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_moments, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_min, m)?)?;
    m.add_function(wrap_pyfunction!(q_w, m)?)?;
    m.add_function(wrap_pyfunction!(sharpe, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(sharpe_triple, m)?)?;
    m.add_function(wrap_pyfunction!(dual_return_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(sample_bounded_pareto, m)?)?;
    m.add_function(wrap_pyfunction!(generate_market, m)?)?;
    m.add_function(wrap_pyfunction!(solve_min_risk, m)?)?;
    m.add_function(wrap_pyfunction!(solve_or_portfolio, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
