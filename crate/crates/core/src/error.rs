use thiserror::Error;

/// A parameter set violates one of the model invariants.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid parameter `{field}`: {reason}")]
pub struct ParamError {
    pub field: &'static str,
    pub reason: String,
}

impl ParamError {
    pub(crate) fn new(field: &'static str, reason: impl Into<String>) -> Self {
        Self {
            field,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: cannot parse `{value}` for `{key}` as a number")]
    BadNumber {
        line: usize,
        key: String,
        value: String,
    },
    #[error(transparent)]
    Invalid(#[from] ParamError),
    #[error("cannot read config: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    /// No physical steady state exists at this detuning (region a).
    #[error("no steady state at Delta0 = {delta0}")]
    NoRoot { delta0: f64 },
    /// The detuning puts the bare cavity frequency at or below zero.
    #[error("Delta0 = {delta0} gives omega0 = {omega0} <= 0")]
    NonPositiveCavityFrequency { delta0: f64, omega0: f64 },
    #[error(transparent)]
    Invalid(#[from] ParamError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("branch is marginal: max Re(lambda) = {max_real_eig:e} within tolerance {tol:e}")]
    MarginalAtThreshold { max_real_eig: f64, tol: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThresholdError {
    #[error("root count is {count} everywhere on [{lo}, {hi}]")]
    NoTransition { lo: f64, hi: f64, count: usize },
    #[error("kappa bracket [{lo}, {hi}] does not straddle the lower bound (both ends {phase})")]
    SamePhase { lo: f64, hi: f64, phase: &'static str },
    #[error("Delta0 = {delta0} is outside the report range [{lo}, {hi}]")]
    OutOfRange { delta0: f64, lo: f64, hi: f64 },
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error(transparent)]
    Invalid(#[from] ParamError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChiError {
    #[error("susceptibility denominator Xi^2 + Theta^2 = {0:e} is degenerate")]
    DegenerateDenominator(f64),
    #[error("curve has {peaks} absorption peak(s); a window needs two")]
    NoWindow { peaks: usize },
    #[error("Delta0 grid must be strictly increasing with at least two points")]
    BadGrid,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("step size {h:e} fell below {min:e} at t = {t} (stiff system)")]
    StepSizeUnderflow { t: f64, h: f64, min: f64 },
    #[error("tolerance {0:e} outside [1e-12, 1e-3]")]
    BadTolerance(f64),
    #[error("perturbation {0:e} outside [0, 0.1]")]
    BadEpsilon(f64),
    #[error("state became non-finite at t = {0}")]
    NonFinite(f64),
    #[error("neither converged nor diverged by t = {t_max} (distance {distance:e})")]
    Inconclusive { t_max: f64, distance: f64 },
}
