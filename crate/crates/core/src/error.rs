use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Finite-time convergence of the comparison envelope needs `q ∈ (0, 1)`;
    /// for `q ≥ 1` the envelope only decays asymptotically.
    #[error("exponent q = {0} outside (0, 1); finite-time reachability is only guaranteed for 0 < q < 1")]
    ExponentOutOfRange(f64),

    #[error("cost matrix is ill-conditioned (condition number {0:.3e} exceeds 1e12)")]
    IllConditioned(f64),

    #[error("cost matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("malformed problem: {0}")]
    Malformed(String),

    #[error("deadline unreachable under schedule: running integral never reaches the critical value on [0, {0}] s")]
    DeadlineUnreachable(f64),

    #[error("h(t_r)^(1-q) is not real for q = {q}; reset q so that 1-q has an odd denominator")]
    NonRealPower { q: f64 },

    #[error("time {t} s is past the contraction horizon {horizon} s")]
    PastHorizon { t: f64, horizon: f64 },

    #[error("step at t = {t} s: {source}")]
    Step {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("initial condition rejected: {0}")]
    Inadmissible(String),
}
