use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("relative risk aversion {0} is unsupported (need alpha > 0, alpha != 1)")]
    RiskAversionUnsupported(f64),
    #[error("signal correlation {0} admits arbitrage (need |rho| < 1)")]
    ArbitrageSignal(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("negative wealth {0}")]
    NegativeWealth(f64),
    #[error("integrand is NaN at x = {0}")]
    NonFiniteIntegrand(f64),
    #[error("bad distribution: {0}")]
    BadDistribution(String),
    #[error("fraction {phi} outside admissible interval [{lo}, {hi}]")]
    OutsideAdmissible { phi: f64, lo: f64, hi: f64 },
    #[error("bracket expansion exceeded |phi| <= {0}")]
    BracketFailure(f64),
    #[error("growth constant is not finite: {0}")]
    DivergentGrowth(f64),
    #[error("inadmissible policy: {0}")]
    InadmissiblePolicy(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::RiskAversionUnsupported(_) => "RiskAversionUnsupported",
            Error::ArbitrageSignal(_) => "ArbitrageSignal",
            Error::Domain(_) => "DomainError",
            Error::NegativeWealth(_) => "NegativeWealth",
            Error::NonFiniteIntegrand(_) => "NonFiniteIntegrand",
            Error::BadDistribution(_) => "BadDistribution",
            Error::OutsideAdmissible { .. } => "OutsideAdmissible",
            Error::BracketFailure(_) => "BracketFailure",
            Error::DivergentGrowth(_) => "DivergentGrowth",
            Error::InadmissiblePolicy(_) => "InadmissiblePolicy",
        }
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
