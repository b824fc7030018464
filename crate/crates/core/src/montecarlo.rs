//! Importance-sampling estimators of `Fₙ(nx)` and `fₙ(nx)` under the tilt
//! `θ̃(x)`, with deterministic parallel replication.
//!
//! Replication `r` draws from its own ChaCha8 stream `(seed, r)`. Replications
//! are grouped in fixed blocks, each block is accumulated sequentially and the
//! block summaries are merged in a fixed pairwise order, so results do not
//! depend on the number of worker threads.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cramer::theta_tilde;
use crate::error::{Error, Result};
use crate::lambertw::lambert_w;
use crate::laplace::{kappa, log_laplace_is_draw, QuadratureConfig};
use crate::model::LognormalModel;
use crate::stats::Welford;
use crate::tilted::TiltedSampler;

/// Normal quantile used for the reported 95% intervals.
pub const Z95: f64 = 1.96;

/// Replications per deterministic block.
const BLOCK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub value: f64,
    /// `1.96 · sd / √R`.
    pub half_width: f64,
    /// `log value`, finite even when `value` underflows.
    pub log_value: f64,
    pub replications: usize,
    pub seed: Option<u64>,
    /// No replication produced a nonzero contribution.
    pub degenerate: bool,
}

impl MonteCarloEstimate {
    pub(crate) fn from_logs(log_value: f64, log_half_width: f64, replications: usize, seed: Option<u64>) -> Self {
        Self {
            value: log_value.exp(),
            half_width: log_half_width.exp(),
            log_value,
            replications,
            seed,
            degenerate: false,
        }
    }

    /// Estimate from per-replication values `e^{shift} · v_r` summarised in `acc`.
    fn from_scaled(acc: &Welford, shift: f64, seed: Option<u64>) -> Self {
        let r = acc.count() as usize;
        let mean = acc.mean();
        if mean <= 0.0 {
            return Self {
                value: 0.0,
                half_width: 0.0,
                log_value: f64::NEG_INFINITY,
                replications: r,
                seed,
                degenerate: true,
            };
        }
        let log_hw = Z95.ln() + 0.5 * (acc.sample_variance() / r as f64).ln() + shift;
        Self::from_logs(shift + mean.ln(), log_hw, r, seed)
    }

    /// Estimate from the logs of per-replication values.
    pub(crate) fn from_log_samples(logs: &[f64], seed: Option<u64>) -> Self {
        let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut acc = Welford::default();
        for &l in logs {
            acc.push(if shift.is_finite() { (l - shift).exp() } else { 0.0 });
        }
        Self::from_scaled(&acc, if shift.is_finite() { shift } else { 0.0 }, seed)
    }

    /// `half_width / value`.
    pub fn relative_error(&self) -> f64 {
        if self.value > 0.0 {
            self.half_width / self.value
        } else {
            f64::INFINITY
        }
    }

    pub fn lower(&self) -> f64 {
        self.value - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.value + self.half_width
    }
}

/// Replication count, seed and thread count for a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct McConfig {
    pub replications: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

impl McConfig {
    pub fn new(replications: usize, seed: u64) -> Self {
        Self {
            replications,
            seed,
            workers: None,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }
}

/// The RNG of replication `r`.
pub fn replication_rng(seed: u64, r: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r);
    rng
}

fn pairwise_merge(mut parts: Vec<Welford>) -> Welford {
    while parts.len() > 1 {
        parts = parts
            .chunks(2)
            .map(|c| if c.len() == 2 { c[0].merge(&c[1]) } else { c[0] })
            .collect();
    }
    parts.pop().unwrap_or_default()
}

/// Runs `f` once per replication and returns the merged accumulator of the
/// values it returns. `f` must be a pure function of the RNG it is handed.
pub fn replicate<F>(mc: &McConfig, f: F) -> Result<Welford>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    if mc.replications < 2 {
        return Err(Error::InsufficientSample {
            needed: 2,
            got: mc.replications,
        });
    }
    let nblocks = mc.replications.div_ceil(BLOCK);
    let run = || -> Result<Vec<Welford>> {
        (0..nblocks)
            .into_par_iter()
            .map(|b| {
                let mut acc = Welford::default();
                let end = ((b + 1) * BLOCK).min(mc.replications);
                for r in b * BLOCK..end {
                    let mut rng = replication_rng(mc.seed, r as u64);
                    acc.push(f(&mut rng)?);
                }
                Ok(acc)
            })
            .collect()
    };
    let parts = match mc.workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    Ok(pairwise_merge(parts))
}

/// How `Lⁿ(θ̃)` enters the distribution-function estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum LaplaceMode {
    /// `κ(θ̃)` from quadrature; the estimator is unbiased.
    #[default]
    Numeric,
    /// Product of n independent importance-sampling draws per replication; unbiased.
    IsProduct,
    /// One importance-sampling draw raised to the n-th power; biased upwards for n > 1.
    IsSingle,
}

/// Tilt, `κ` and sampler for one `(σ, x)`.
struct TiltSetup {
    theta: f64,
    kappa: f64,
    w: f64,
    sampler: TiltedSampler,
}

impl TiltSetup {
    fn new(model: &LognormalModel, x: f64, cfg: &QuadratureConfig) -> Result<Self> {
        let theta = theta_tilde(model, x)?;
        Ok(Self {
            theta,
            kappa: kappa(model, theta, cfg)?,
            w: lambert_w(theta * model.sigma2())?,
            sampler: TiltedSampler::new(model, theta, cfg)?,
        })
    }

    fn draw_sum<R: Rng + ?Sized>(&self, n: u32, rng: &mut R, buf: &mut Vec<f64>) -> Result<f64> {
        buf.clear();
        for _ in 0..n {
            buf.push(self.sampler.sample(rng)?.0);
        }
        Ok(buf.iter().sum())
    }
}

fn check_n(n: u32, min: u32) -> Result<()> {
    if n < min {
        Err(Error::Config(format!("n must be at least {min}, got {n}")))
    } else {
        Ok(())
    }
}

fn finish(acc: Welford, shift: f64, seed: u64, what: &str) -> MonteCarloEstimate {
    let e = MonteCarloEstimate::from_scaled(&acc, shift, Some(seed));
    if e.degenerate {
        warn!("degenerate sample for {what}: no replication contributed");
    }
    e
}

/// `Fₙ(nx)` by `e^{θ̃Sₙ}Lⁿ(θ̃)1{Sₙ < nx}` with `X_i ~ F_θ̃`.
pub fn cdf_is_estimate(
    model: &LognormalModel,
    n: u32,
    x: f64,
    mode: LaplaceMode,
    cfg: &QuadratureConfig,
    mc: &McConfig,
) -> Result<MonteCarloEstimate> {
    check_n(n, 1)?;
    let t = TiltSetup::new(model, x, cfg)?;
    let nf = f64::from(n);
    let target = nf * x;
    // the weight never exceeds e^{θ̃nx + nκ}, so values are scaled into (0, 1]
    let shift = t.theta * target + nf * t.kappa;
    let acc = replicate(mc, |rng| {
        let mut buf = Vec::with_capacity(n as usize);
        let s = t.draw_sum(n, rng, &mut buf)?;
        let log_l = match mode {
            LaplaceMode::Numeric => nf * t.kappa,
            LaplaceMode::IsProduct => (0..n).map(|_| log_laplace_is_draw(model, t.w, rng)).sum(),
            LaplaceMode::IsSingle => nf * log_laplace_is_draw(model, t.w, rng),
        };
        Ok(if s < target {
            (t.theta * s + log_l - shift).exp()
        } else {
            0.0
        })
    })?;
    Ok(finish(acc, shift, mc.seed, "cdf"))
}

/// Which tilted conditional-density estimator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum PdfVariant {
    /// `(e^{θ̃Sₙ + nκ}/n) Σ f(nx − S₋ᵢ)`.
    A,
    /// `(1/n) Σ f(nx − S₋ᵢ) e^{θ̃S₋ᵢ + (n−1)κ}`.
    #[default]
    B,
}

/// `fₙ(nx)` by conditioning on the leave-one-out sums `S₋ᵢ`.
pub fn pdf_is_estimate(
    model: &LognormalModel,
    n: u32,
    x: f64,
    variant: PdfVariant,
    cfg: &QuadratureConfig,
    mc: &McConfig,
) -> Result<MonteCarloEstimate> {
    check_n(n, 2)?;
    let t = TiltSetup::new(model, x, cfg)?;
    let nf = f64::from(n);
    let target = nf * x;
    let shift = t.theta * target + nf * t.kappa;
    let acc = replicate(mc, |rng| {
        let mut buf = Vec::with_capacity(n as usize);
        let s = t.draw_sum(n, rng, &mut buf)?;
        let mut total = 0.0;
        for &xi in &buf {
            let rest = s - xi;
            let lf = model.ln_pdf(target - rest);
            if lf == f64::NEG_INFINITY {
                continue;
            }
            let lw = match variant {
                PdfVariant::A => t.theta * s + nf * t.kappa,
                PdfVariant::B => t.theta * rest + (nf - 1.0) * t.kappa,
            };
            total += (lf + lw - shift).exp();
        }
        Ok(total / nf)
    })?;
    Ok(finish(acc, shift, mc.seed, "pdf"))
}

/// Crude Monte Carlo: the fraction of untilted replications with `Sₙ < nx`.
pub fn naive_estimate(model: &LognormalModel, n: u32, x: f64, mc: &McConfig) -> Result<MonteCarloEstimate> {
    check_n(n, 1)?;
    let target = f64::from(n) * x;
    let acc = replicate(mc, |rng| {
        let s: f64 = (0..n).map(|_| model.sample(rng)).sum();
        Ok(if s < target { 1.0 } else { 0.0 })
    })?;
    Ok(finish(acc, 0.0, mc.seed, "crude estimate"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyDiagnostic {
    pub x_grid: Vec<f64>,
    /// Numeric-mode estimate used as the reference `α`.
    pub alpha: Vec<f64>,
    /// `half_width / value` of the single-draw estimator.
    pub rel_err: Vec<f64>,
    /// `(hw²/1.96² + (value − α)²) / α^{2−ε}`.
    pub mse_ratio: Vec<f64>,
    /// Relative 95% half-width of crude Monte Carlo at the same R,
    /// `1.96√((1−α)/(Rα))`.
    pub crude_rel_err: Vec<f64>,
    pub degenerate: Vec<bool>,
    pub epsilon: f64,
}

/// Relative error and MSE proxy of the single-draw estimator along a grid
/// of decreasing `x`.
pub fn efficiency_diagnostic(
    model: &LognormalModel,
    n: u32,
    x_grid: &[f64],
    epsilon: f64,
    cfg: &QuadratureConfig,
    mc: &McConfig,
) -> Result<EfficiencyDiagnostic> {
    if !(epsilon > 0.0) {
        return Err(Error::domain("epsilon must be positive", epsilon));
    }
    if x_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("x grid must be strictly decreasing".into()));
    }
    let mut d = EfficiencyDiagnostic {
        x_grid: x_grid.to_vec(),
        alpha: vec![],
        rel_err: vec![],
        mse_ratio: vec![],
        crude_rel_err: vec![],
        degenerate: vec![],
        epsilon,
    };
    let rf = mc.replications as f64;
    for &x in x_grid {
        let reference = cdf_is_estimate(model, n, x, LaplaceMode::Numeric, cfg, mc)?;
        let e = cdf_is_estimate(model, n, x, LaplaceMode::IsSingle, cfg, mc)?;
        let a = reference.value;
        let var = (e.half_width / Z95).powi(2);
        d.alpha.push(a);
        d.rel_err.push(e.relative_error());
        d.mse_ratio.push((var + (e.value - a).powi(2)) / a.powf(2.0 - epsilon));
        d.crude_rel_err.push(Z95 * ((1.0 - a) / (rf * a)).sqrt());
        d.degenerate.push(e.degenerate || reference.degenerate);
    }
    Ok(d)
}
