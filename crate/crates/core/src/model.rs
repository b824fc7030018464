use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::normal_cdf;

/// The lognormal law LN(0, σ²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LognormalModel {
    sigma: f64,
}

impl LognormalModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::domain("sigma must be positive and finite", sigma));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// `E X = e^{σ²/2}`.
    pub fn mean(&self) -> f64 {
        (0.5 * self.sigma2()).exp()
    }

    /// Density; zero for `x ≤ 0`.
    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.ln_pdf(x).exp()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let l = x.ln();
        -l - self.sigma.ln() - 0.5 * (2.0 * PI).ln() - l * l / (2.0 * self.sigma2())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        normal_cdf(x.ln() / self.sigma)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        (self.sigma * z).exp()
    }
}
