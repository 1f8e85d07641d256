use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("period ratio alpha = {alpha} must exceed 1: no typical minimum exists for p <= N")]
    PeriodRatio { alpha: f64 },

    #[error("return constraint R = {r} is infeasible: weighted variance V1 = {v1} is degenerate")]
    InfeasibleReturn { r: f64, v1: f64 },

    #[error("risk level {epsilon} is below the attainable floor {floor}")]
    RiskBelowFloor { epsilon: f64, floor: f64 },

    #[error("maximal Sharpe ratio is undefined: {0}")]
    SharpeUndefined(String),

    #[error("variance {value} at asset {index} is not strictly positive")]
    Domain { index: usize, value: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is ill-conditioned (condition estimate {estimate:e} exceeds {limit:e})")]
    IllConditioned { estimate: f64, limit: f64 },

    #[error("budget and return constraints are collinear (determinant {det:e})")]
    CollinearConstraints { det: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors that are raised per trial by the numerical solvers
    /// and should be counted as failed trials rather than aborting a run.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite
                | Error::IllConditioned { .. }
                | Error::CollinearConstraints { .. }
                | Error::SharpeUndefined(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
