use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("lags must be positive (tau1 = {tau1}, tau2 = {tau2})")]
    NonPositiveLag { tau1: f64, tau2: f64 },

    #[error("coincident lags tau1 = tau2 = {0}; merge the terms into a single-lag problem")]
    CoincidentLags(f64),

    #[error("gamma = 0 leaves a single-lag problem; use the single-lag (Lambert W) solver")]
    ZeroGamma,

    #[error("beta = 0 leaves no delayed term")]
    ZeroBeta,

    #[error("logarithm of zero")]
    LogOfZero,

    #[error("branch {0} is singular: ln_j(gamma2) = 0")]
    SingularBranch(i64),

    #[error("sequence too short: need {needed} entries, got {got}")]
    SequenceTooShort { needed: usize, got: usize },

    #[error("non-finite series term at m = {m}, k = {k}")]
    NonFiniteTerm { m: usize, k: usize },

    #[error("characteristic derivative vanished at s = {re}{im:+}i")]
    SingularDerivative { re: f64, im: f64 },

    #[error("characteristic function has a root on the contour |z| = {radius}")]
    RootOnContour { radius: f64 },

    #[error("step dt = {dt} exceeds min(tau1, tau2)/4 = {limit}")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("basis is rank deficient: roots {i} and {j} nearly coincide")]
    RankDeficient { i: usize, j: usize },
}
