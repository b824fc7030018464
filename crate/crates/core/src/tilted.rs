//! The exponential family `f_θ(x) = e^{−θx−κ(θ)} f(x)` generated by LN(0, σ²):
//! moments, closed-form approximations of `F_θ`, and exact samplers.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::Serialize;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::lambertw::lambert_w;
use crate::laplace::{laplace_asymptotic, laplace_k, log_laplace_k, AsymptoticVariant, QuadratureConfig};
use crate::model::LognormalModel;
use crate::special::normal_cdf;

/// Per-draw proposal budget of the naive sampler.
pub const NAIVE_PROPOSAL_CAP: u64 = 1_000_000_000;

/// Tilt parameter together with the lognormal approximation `LN(μ_θ, σ²_θ)` of `F_θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TiltedParams {
    pub theta: f64,
    /// `W(θσ²)`.
    pub w: f64,
    pub mu_theta: f64,
    pub sigma2_theta: f64,
}

impl TiltedParams {
    pub fn new(model: &LognormalModel, theta: f64) -> Result<Self> {
        check_theta(theta)?;
        let w = lambert_w(theta * model.sigma2())?;
        Ok(Self {
            theta,
            w,
            mu_theta: -w,
            sigma2_theta: model.sigma2() / (1.0 + w),
        })
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && theta >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain("theta must be finite and nonnegative", theta))
    }
}

fn check_positive_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && theta > 0.0 {
        Ok(())
    } else {
        Err(Error::domain("theta must be positive", theta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SamplerReport {
    pub draws_accepted: u64,
    pub proposals_used: u64,
    pub empirical_acceptance: f64,
}

impl SamplerReport {
    fn new(draws_accepted: u64, proposals_used: u64) -> Self {
        Self {
            draws_accepted,
            proposals_used,
            empirical_acceptance: if proposals_used == 0 {
                0.0
            } else {
                draws_accepted as f64 / proposals_used as f64
            },
        }
    }

    pub fn combine(&self, other: &SamplerReport) -> SamplerReport {
        SamplerReport::new(
            self.draws_accepted + other.draws_accepted,
            self.proposals_used + other.proposals_used,
        )
    }
}

/// Mean and variance of `LN(μ_θ, σ²_θ)`; these are asymptotically exact as `θ → ∞`.
pub fn tilted_mean_var_asymptotic(model: &LognormalModel, theta: f64) -> Result<(f64, f64)> {
    let p = TiltedParams::new(model, theta)?;
    let s2 = p.sigma2_theta;
    let mean = (p.mu_theta + 0.5 * s2).exp();
    let var = (2.0 * p.mu_theta + s2).exp() * s2.exp_m1();
    Ok((mean, var))
}

/// `E_θ X = L₁(θ)/L₀(θ)`.
pub fn tilted_mean_exact(model: &LognormalModel, theta: f64, cfg: &QuadratureConfig) -> Result<f64> {
    check_theta(theta)?;
    if theta == 0.0 {
        return Ok(model.mean());
    }
    Ok((log_laplace_k(model, theta, 1, cfg)? - log_laplace_k(model, theta, 0, cfg)?).exp())
}

/// `F_θ(x) ≈ Φ((log x − μ_θ)/σ_θ)`.
pub fn approx_cdf_lognormal(model: &LognormalModel, theta: f64, x: f64) -> Result<f64> {
    let p = TiltedParams::new(model, theta)?;
    if x <= 0.0 {
        return Ok(0.0);
    }
    Ok(normal_cdf((x.ln() - p.mu_theta) / p.sigma2_theta.sqrt()))
}

/// `W(θσ²e^{−σ²})`, the mode parameter of the Gamma proposal.
fn gamma_w(model: &LognormalModel, theta: f64) -> Result<f64> {
    let s2 = model.sigma2();
    lambert_w(theta * s2 * (-s2).exp())
}

/// `F_θ(x) ≈ P(G ≤ x)` with `G ~ Gamma(w/σ²+1, rate θ)`.
pub fn approx_cdf_gamma(model: &LognormalModel, theta: f64, x: f64) -> Result<f64> {
    check_positive_theta(theta)?;
    if x <= 0.0 {
        return Ok(0.0);
    }
    let w = gamma_w(model, theta)?;
    Ok(gamma_lr(w / model.sigma2() + 1.0, theta * x))
}

/// `F_θ(x) ≈ Φ` with mean `(w+σ²)/(θσ²)` and variance `(w+σ²)/(θ²σ²)`.
pub fn approx_cdf_normal(model: &LognormalModel, theta: f64, x: f64) -> Result<f64> {
    check_positive_theta(theta)?;
    let s2 = model.sigma2();
    let w = gamma_w(model, theta)?;
    let mean = (w + s2) / (theta * s2);
    let sd = ((w + s2) / (theta * theta * s2)).sqrt();
    Ok(normal_cdf((x - mean) / sd))
}

/// Acceptance probability of the Gamma-proposal sampler,
/// `α^{α+1}/Γ(α+1) · √(2π)σ · e^{σ²(α+1)²/2} · L(αe^{σ²(α+1)})`, evaluated in logs.
pub fn acceptance_prob_gamma(model: &LognormalModel, theta: f64, cfg: &QuadratureConfig) -> Result<f64> {
    check_positive_theta(theta)?;
    let s2 = model.sigma2();
    let alpha = gamma_w(model, theta)? / s2;
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let arg = alpha * (s2 * (alpha + 1.0)).exp();
    let log_p = (alpha + 1.0) * alpha.ln() - ln_gamma(alpha + 1.0)
        + 0.5 * (2.0 * PI).ln()
        + model.sigma().ln()
        + 0.5 * s2 * (alpha + 1.0).powi(2)
        + log_laplace_k(model, arg, 0, cfg)?;
    Ok(log_p.exp().min(1.0))
}

/// Acceptance probability `L(θ)` of the naive sampler.
pub fn acceptance_prob_naive(model: &LognormalModel, theta: f64, cfg: &QuadratureConfig) -> Result<f64> {
    check_theta(theta)?;
    if theta == 0.0 {
        return Ok(1.0);
    }
    laplace_k(model, theta, 0, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Algorithm {
    /// Lognormal proposal, accept with probability `e^{−θZ}`.
    Naive,
    /// Gamma proposal around the mode, accept with probability `e^{−log²Z/(2σ²)}`.
    GammaProposal,
}

/// Sampler for `F_θ` with everything that depends on `θ` precomputed.
#[derive(Debug, Clone)]
pub struct TiltedSampler {
    model: LognormalModel,
    theta: f64,
    algorithm: Algorithm,
    /// Present when `θ > 0`.
    gamma: Option<(Gamma<f64>, f64)>,
    inv_2s2: f64,
}

impl TiltedSampler {
    /// Chooses the algorithm with the larger acceptance probability:
    /// the closed form `L̃(θ)` for the naive sampler against the
    /// exact expression for the Gamma proposal.
    pub fn new(model: &LognormalModel, theta: f64, cfg: &QuadratureConfig) -> Result<Self> {
        check_theta(theta)?;
        let algorithm = if theta == 0.0 {
            Algorithm::Naive
        } else {
            let naive = laplace_asymptotic(model, theta, AsymptoticVariant::WithDenominator)?;
            let gamma = acceptance_prob_gamma(model, theta, cfg)?;
            if gamma > naive {
                Algorithm::GammaProposal
            } else {
                Algorithm::Naive
            }
        };
        Self::with_algorithm(model, theta, algorithm)
    }

    pub fn with_algorithm(model: &LognormalModel, theta: f64, algorithm: Algorithm) -> Result<Self> {
        check_theta(theta)?;
        let gamma = if theta > 0.0 {
            let s2 = model.sigma2();
            let w = gamma_w(model, theta)?;
            let a = w / s2;
            if a > 0.0 {
                let g = Gamma::new(a + 1.0, 1.0 / a).map_err(|e| Error::Config(format!("gamma proposal: {e}")))?;
                // m = w/(θσ²) = e^{−w−σ²}
                Some((g, (-w - s2).exp()))
            } else {
                None
            }
        } else {
            None
        };
        if algorithm == Algorithm::GammaProposal && gamma.is_none() {
            return Err(Error::domain("the Gamma proposal needs theta > 0", theta));
        }
        Ok(Self {
            model: *model,
            theta,
            algorithm,
            gamma,
            inv_2s2: 1.0 / (2.0 * model.sigma2()),
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// One exact draw from `F_θ`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, SamplerReport)> {
        match self.algorithm {
            Algorithm::Naive => self.sample_naive(rng),
            Algorithm::GammaProposal => Ok(self.sample_gamma(rng)),
        }
    }

    fn sample_naive<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, SamplerReport)> {
        for k in 1..=NAIVE_PROPOSAL_CAP {
            let z = self.model.sample(rng);
            let u: f64 = rng.random();
            if u <= (-self.theta * z).exp() {
                return Ok((z, SamplerReport::new(1, k)));
            }
        }
        Err(Error::ProposalCap {
            cap: NAIVE_PROPOSAL_CAP,
            theta: self.theta,
        })
    }

    fn sample_gamma<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, SamplerReport) {
        let (g, m) = self.gamma.as_ref().expect("checked at construction");
        let mut k = 0;
        loop {
            k += 1;
            let z = g.sample(rng);
            let u: f64 = rng.random();
            let l = z.ln();
            if u.ln() <= -l * l * self.inv_2s2 {
                return (m * z, SamplerReport::new(1, k));
            }
        }
    }

    /// `count` draws with the combined report.
    pub fn sample_many<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<(Vec<f64>, SamplerReport)> {
        let mut out = Vec::with_capacity(count);
        let mut rep = SamplerReport::default();
        for _ in 0..count {
            let (x, r) = self.sample(rng)?;
            out.push(x);
            rep = rep.combine(&r);
        }
        Ok((out, rep))
    }
}

/// One draw by naive acceptance-rejection from the untilted lognormal.
pub fn sample_naive<R: Rng + ?Sized>(model: &LognormalModel, theta: f64, rng: &mut R) -> Result<(f64, SamplerReport)> {
    TiltedSampler::with_algorithm(model, theta, Algorithm::Naive)?.sample(rng)
}

/// One draw by acceptance-rejection from the Gamma proposal.
pub fn sample_gamma_ar<R: Rng + ?Sized>(model: &LognormalModel, theta: f64, rng: &mut R) -> Result<(f64, SamplerReport)> {
    TiltedSampler::with_algorithm(model, theta, Algorithm::GammaProposal)?.sample(rng)
}

/// One draw from whichever sampler has the larger acceptance probability.
pub fn sample_auto<R: Rng + ?Sized>(model: &LognormalModel, theta: f64, rng: &mut R) -> Result<f64> {
    Ok(TiltedSampler::new(model, theta, &QuadratureConfig::default())?.sample(rng)?.0)
}
