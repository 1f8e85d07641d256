use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0} check(s) failed")]
    CheckFailed(usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<replica_portfolio::Error> for CliError {
    fn from(e: replica_portfolio::Error) -> Self {
        use replica_portfolio::Error as E;
        match e {
            E::Parameter(_)
            | E::PeriodRatio { .. }
            | E::Domain { .. }
            | E::InfeasibleReturn { .. }
            | E::RiskBelowFloor { .. } => CliError::Config(e.to_string()),
            E::Io(msg) => CliError::Io(std::io::Error::other(msg)),
            other => CliError::Numerical(other.to_string()),
        }
    }
}
