//! Left-tail probabilities and densities of sums of i.i.d. lognormal variables
//! by exponential tilting.
//!
//! The modules build on each other:
//! [`lambertw`] → [`laplace`] (transform, cumulants, `Lⁿ` estimators) →
//! [`tilted`] (the tilted family and its samplers) and [`cramer`] (saddlepoint
//! `θ(x)`) → [`saddlepoint`] (analytic approximations) and [`montecarlo`]
//! (importance sampling). [`tables`] reproduces the published tables and
//! [`cli`] backs the `lognsum` binary.

pub mod cli;
pub mod cramer;
pub mod error;
pub mod lambertw;
pub mod laplace;
pub mod model;
pub mod montecarlo;
pub mod saddlepoint;
pub mod special;
pub mod stats;
pub mod tables;
pub mod tilted;

pub use error::{Error, Result};
pub use model::LognormalModel;
