use thiserror::Error;

/// Everything that can go wrong in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("resolvent density is not integrable: {0}")]
    NonIntegrableResolvent(String),

    #[error("quadrature did not converge for {what}: estimated error {achieved:.3e}, requested {requested:.3e}")]
    QuadratureNoConvergence {
        what: String,
        achieved: f64,
        requested: f64,
    },

    #[error("q -> 0 extrapolation unstable: last extrapolants {last:.12e} and {previous:.12e}")]
    ExtrapolationUnstable { last: f64, previous: f64 },

    #[error("degenerate denominator in {0}")]
    DegenerateDenominator(String),

    #[error("model is recurrent, transient quantity requested")]
    NotTransient,

    #[error("invalid clock: {0}")]
    InvalidClock(String),

    #[error("local time at level {0} was not recorded")]
    MissingLevelLocalTime(f64),

    #[error("starting point {0} is outside the set where the harmonic function is positive")]
    StartingPointNotInH(f64),

    #[error("weight does not integrate to one (integral = {0})")]
    UnnormalizedWeight(f64),

    #[error("unsupported model for this operation: {0}")]
    UnsupportedModel(String),

    #[error("simulation horizon {0} reached before the clock rang")]
    HorizonExceeded(f64),

    #[error("probability {value} outside [0, 1] beyond the error budget {budget:.3e}")]
    ProbabilityOutOfRange { value: f64, budget: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
