use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain where the quantity is defined.
    #[error("domain error: {what} (got {value})")]
    Domain { what: &'static str, value: f64 },

    /// The target point lies at or above the mean, where no nonnegative saddlepoint exists.
    #[error("x = {x} is not in the left tail (requires x < {bound})")]
    NotLeftTail { x: f64, bound: f64 },

    /// Newton-Raphson did not reach the tolerance.
    #[error("no convergence after {iterations} iterations (theta = {theta}, residual = {residual:e})")]
    Convergence {
        iterations: usize,
        theta: f64,
        residual: f64,
    },

    /// Too few replications to form a variance estimate.
    #[error("insufficient sample: need at least {needed} replications, got {got}")]
    InsufficientSample { needed: usize, got: usize },

    /// The naive tilted sampler exceeded its per-draw proposal budget.
    #[error("naive sampler exceeded {cap} proposals for one draw at theta = {theta}")]
    ProposalCap { cap: u64, theta: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64) -> Self {
        Error::Domain { what, value }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
