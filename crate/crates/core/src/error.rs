use thiserror::Error;

/// Errors raised by parameter validation and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("theta0 must be strictly below theta1 (got theta0={theta0}, theta1={theta1})")]
    InvalidOrder { theta0: f64, theta1: f64 },
    #[error("fundamental values must be finite and positive (got {value})")]
    NonPositiveFundamental { value: f64 },
    #[error("prior probability p0 must lie in (0, 1) (got {p0})")]
    InvalidProbability { p0: f64 },
    #[error("rate must be finite and positive (got {rate})")]
    InvalidRate { rate: f64 },
    #[error("at least two agents are required (got {n_agents})")]
    TooFewAgents { n_agents: usize },
    #[error("poisson mean must be nonnegative (got {mean})")]
    NegativeMean { mean: f64 },
    #[error("operation requires a {expected} prior")]
    WrongPrior { expected: &'static str },
    #[error("profile has {got} thresholds but the game has {expected} agents")]
    ProfileLength { expected: usize, got: usize },
    #[error("agent index {index} out of range for {n_agents} agents")]
    AgentIndex { index: usize, n_agents: usize },
    #[error(
        "no finite search bound: opponent activation limit {limit} is not below theta1={theta1}"
    )]
    NoFiniteCap { limit: f64, theta1: f64 },
    #[error("activation set is not a prefix: inactive at k={inactive_at}, active again at k={active_at}")]
    SingleCrossingViolated { inactive_at: u32, active_at: u32 },
    #[error("premise E[theta] < N-1 violated (E[theta]={mean}, N-1={bound})")]
    PremiseViolated { mean: f64, bound: f64 },
    #[error("threshold {0} is not supported here")]
    UnsupportedThreshold(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidOrder { .. } => "InvalidOrder",
            Error::NonPositiveFundamental { .. } => "NonPositiveFundamental",
            Error::InvalidProbability { .. } => "InvalidProbability",
            Error::InvalidRate { .. } => "InvalidRate",
            Error::TooFewAgents { .. } => "TooFewAgents",
            Error::NegativeMean { .. } => "NegativeMean",
            Error::WrongPrior { .. } => "WrongPrior",
            Error::ProfileLength { .. } => "ProfileLength",
            Error::AgentIndex { .. } => "AgentIndex",
            Error::NoFiniteCap { .. } => "NoFiniteCap",
            Error::SingleCrossingViolated { .. } => "SingleCrossingViolated",
            Error::PremiseViolated { .. } => "PremiseViolated",
            Error::UnsupportedThreshold(_) => "UnsupportedThreshold",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }

    /// True for errors caused by the inputs rather than by a numerical or
    /// consistency failure inside a solver.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NoFiniteCap { .. } | Error::SingleCrossingViolated { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
