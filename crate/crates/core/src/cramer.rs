//! Saddlepoint `θ(x)` solving `κ′(θ) = −x`: the closed-form start `θ̃(x)`,
//! Newton-Raphson refinement, and the small-`u` asymptotics of `γ` and `θ̃`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::laplace::{cumulants, CumulantSet, QuadratureConfig};
use crate::model::LognormalModel;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaddleSolve {
    pub x: f64,
    pub gamma_x: f64,
    pub theta_tilde: f64,
    pub theta: f64,
    /// Newton steps taken from `θ̃(x)`.
    pub iterations: usize,
    /// `κ′(θ) + x` at the returned `θ`.
    pub residual: f64,
    /// Cumulants at the returned `θ`.
    pub cumulants: CumulantSet,
}

/// `γ(x) = (−1 − log x + √((1 − log x)² + 2σ²))/2`, the root of
/// `γ² + (1 + log x)γ − σ²/2 + log x = 0` with the positive square root.
pub fn gamma_of_x(model: &LognormalModel, x: f64) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::domain("x must be positive and finite", x));
    }
    let l = x.ln();
    let r = ((1.0 - l).powi(2) + 2.0 * model.sigma2()).sqrt();
    // r² − (1 + l)² = 2σ² − 4l, and r + 1 + l ≥ 2, so this form never cancels
    Ok((model.sigma2() - 2.0 * l) / (r + 1.0 + l))
}

/// `θ̃(x) = γ(x)e^{γ(x)}/σ²`; requires `x < e^{σ²/2}`.
pub fn theta_tilde(model: &LognormalModel, x: f64) -> Result<f64> {
    let g = gamma_of_x(model, x)?;
    if x >= model.mean() || !(g > 0.0) {
        return Err(Error::NotLeftTail { x, bound: model.mean() });
    }
    Ok(g * g.exp() / model.sigma2())
}

/// Newton-Raphson for `κ′(θ) = −x` from `θ̃(x)`; steps that would leave
/// `θ > 0` are halved until they do not.
pub fn theta_solve(
    model: &LognormalModel,
    x: f64,
    cfg: &QuadratureConfig,
    tol: f64,
    max_iter: usize,
) -> Result<SaddleSolve> {
    let gamma_x = gamma_of_x(model, x)?;
    let tt = theta_tilde(model, x)?;
    let mut theta = tt;
    let mut c = cumulants(model, theta, cfg)?;
    let mut residual = c.d1 + x;
    let mut iterations = 0;
    while (residual / x).abs() > tol {
        if iterations == max_iter {
            return Err(Error::Convergence {
                iterations,
                theta,
                residual,
            });
        }
        let mut step = residual / c.d2;
        while theta - step <= 0.0 {
            step *= 0.5;
        }
        theta -= step;
        c = cumulants(model, theta, cfg)?;
        residual = c.d1 + x;
        iterations += 1;
    }
    Ok(SaddleSolve {
        x,
        gamma_x,
        theta_tilde: tt,
        theta,
        iterations,
        residual,
        cumulants: c,
    })
}

/// [`theta_solve`] with the default tolerance and iteration budget.
pub fn theta_of_x(model: &LognormalModel, x: f64, cfg: &QuadratureConfig) -> Result<SaddleSolve> {
    theta_solve(model, x, cfg, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

/// Residuals of the small-`u` expansions, each multiplied by the power of
/// `|log u|` that the stated error order says should keep it bounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaResiduals {
    pub u: f64,
    /// `(γ(u) − |log u| − σ²/|log u|)·log²u`.
    pub limit1: f64,
    /// `(uθ̃(u) − |log u|/σ² − 1)·|log u|`.
    pub limit2: f64,
    /// `((γ²(u) − log²u)/(2σ²) − 1)·log²u`.
    pub limit3: f64,
    /// `γ(u) − |log u|`.
    pub gamma_gap: f64,
    /// `(γ(u) − |log u| − σ²/(2|log u|))·log²u`, the expansion with the
    /// coefficient obtained from the closed form of `γ`.
    pub limit1_half: f64,
    /// `(uθ̃(u) − |log u|/σ² − 1/2)·|log u|`.
    pub limit2_half: f64,
    /// `(γ²(u) − log²u)/(2σ²)`, which tends to 1/2.
    pub limit3_value: f64,
}

pub fn asymptotic_lemma_check(model: &LognormalModel, u_grid: &[f64]) -> Result<Vec<LemmaResiduals>> {
    let s2 = model.sigma2();
    u_grid
        .iter()
        .map(|&u| {
            if !(u > 0.0 && u <= 0.1) {
                return Err(Error::domain("lemma grid points must lie in (0, 0.1]", u));
            }
            let a = -u.ln();
            let g = gamma_of_x(model, u)?;
            let ut = u * theta_tilde(model, u)?;
            let gap = g - a;
            // γ² − a² = (γ − a)(γ + a) avoids cancellation
            let l3 = gap * (g + a) / (2.0 * s2);
            Ok(LemmaResiduals {
                u,
                limit1: (gap - s2 / a) * a * a,
                limit2: (ut - a / s2 - 1.0) * a,
                limit3: (l3 - 1.0) * a * a,
                gamma_gap: gap,
                limit1_half: (gap - s2 / (2.0 * a)) * a * a,
                limit2_half: (ut - a / s2 - 0.5) * a,
                limit3_value: l3,
            })
        })
        .collect()
}
