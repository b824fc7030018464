//! Saddlepoint approximations to the density and distribution function of
//! `Sₙ = X₁ + … + Xₙ` at `nx`, for `x` in the left tail.

use serde::Serialize;

use crate::cramer::theta_of_x;
use crate::error::{Error, Result};
use crate::laplace::{CumulantSet, QuadratureConfig};
use crate::model::LognormalModel;
use crate::special::{mills_ratio, INV_SQRT_2PI};

/// The functions `B₀, B₃, B₄, B₆` of the second-order distribution expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BFunctions {
    pub b0: f64,
    pub b3: f64,
    pub b4: f64,
    pub b6: f64,
}

/// Beyond this `λ` the differences `λR(λ) − 1 + λ⁻²` are summed from the
/// asymptotic series instead of being formed by subtraction.
const SERIES_LAMBDA: f64 = 10.0;

/// `Σ_{j ≥ j0} (−1)^j (2j−1)!! λ^{−2j}`, summed until the terms stop shrinking.
fn mills_tail(lambda: f64, j0: u32) -> f64 {
    let x = 1.0 / (lambda * lambda);
    let mut term = 1.0;
    for j in 1..=j0 {
        term *= -(2.0 * f64::from(j) - 1.0) * x;
    }
    let mut sum = 0.0;
    let mut j = j0;
    loop {
        sum += term;
        let next = -term * (2.0 * f64::from(j) + 1.0) * x;
        if next.abs() >= term.abs() || next.abs() < 1e-18 * sum.abs() {
            break;
        }
        term = next;
        j += 1;
    }
    sum
}

/// `B₀(λ) = λe^{λ²/2}Φ(−λ)` and the correction functions, for `λ > 0`.
///
/// Writing `m = λR(λ)` with `R` the Mills ratio, `√(2π)B₀ = m`,
/// `√(2π)B₃ = −λ³(m − 1 + λ⁻²)`, `√(2π)B₄ = λ⁴(m − 1 + λ⁻²)` and
/// `√(2π)B₆ = λ⁶(m − 1 + λ⁻² − 3λ⁻⁴)`.
pub fn b_functions(lambda: f64) -> Result<BFunctions> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::domain("lambda must be positive and finite", lambda));
    }
    let l2 = lambda * lambda;
    let (m, d2, d3) = if lambda < SERIES_LAMBDA {
        let m = lambda * mills_ratio(lambda);
        let d2 = m - 1.0 + 1.0 / l2;
        (m, d2, d2 - 3.0 / (l2 * l2))
    } else {
        let d3 = mills_tail(lambda, 3);
        let d2 = 3.0 / (l2 * l2) + d3;
        (1.0 - 1.0 / l2 + d2, d2, d3)
    };
    Ok(BFunctions {
        b0: INV_SQRT_2PI * m,
        b3: -INV_SQRT_2PI * l2 * lambda * d2,
        b4: INV_SQRT_2PI * l2 * l2 * d2,
        b6: INV_SQRT_2PI * l2 * l2 * l2 * d3,
    })
}

/// Sign of the `ζ₃²` term in the second-order density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum DensityCorrection {
    /// `1 + (ζ₄/8 − 5ζ₃²/24)/n`, Daniels' expansion.
    #[default]
    Classical,
    /// `1 + (ζ₄/8 + 5ζ₃²/24)/n`.
    AsPrinted,
}

/// Divisor of the `ζ₃²B₆` term in the second-order distribution function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum CdfCorrection {
    /// `ζ₃²B₆/(72n)`, the Edgeworth coefficient `1/2 · (1/6)²`.
    #[default]
    Standard,
    /// `ζ₃²B₆/(76n)`, which reproduces the published second-order columns.
    Tabulated,
}

impl CdfCorrection {
    fn divisor(self) -> f64 {
        match self {
            CdfCorrection::Standard => 72.0,
            CdfCorrection::Tabulated => 76.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub struct SaddlepointOptions {
    pub density: DensityCorrection,
    pub cdf: CdfCorrection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaddlepointResult {
    pub n: u32,
    pub x: f64,
    /// Tilt at which the expansion is evaluated (the saddlepoint unless stated otherwise).
    pub theta_x: f64,
    /// `κ(θ) + xθ`.
    pub kappa_star: f64,
    /// `θ√(nκ″(θ))`.
    pub lambda_n: f64,
    pub zeta3: f64,
    pub zeta4: f64,
    pub pdf1: f64,
    pub pdf2: f64,
    pub cdf1: f64,
    pub cdf2: f64,
    pub log_pdf1: f64,
    pub log_cdf1: f64,
    /// Finite where `cdf2` underflows.
    pub log_cdf2: f64,
}

/// Evaluates both expansions at the tilt recorded in `c`.
///
/// With `c` the cumulants at `θ(x)` this is the saddlepoint approximation;
/// any other tilt gives the same formulas with `κ′(θ) ≠ −x`.
pub fn evaluate_at(n: u32, x: f64, c: &CumulantSet, opts: SaddlepointOptions) -> Result<SaddlepointResult> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let nf = f64::from(n);
    let theta = c.theta;
    let kappa_star = c.kappa + x * theta;
    let lambda = theta * (nf * c.d2).sqrt();
    let b = b_functions(lambda)?;
    let (z3, z4) = (c.zeta3, c.zeta4);

    let log_pdf1 = nf * kappa_star - 0.5 * (2.0 * std::f64::consts::PI * nf * c.d2).ln();
    let sign = match opts.density {
        DensityCorrection::Classical => -1.0,
        DensityCorrection::AsPrinted => 1.0,
    };
    let pdf_bracket = 1.0 + (z4 / 8.0 + sign * 5.0 * z3 * z3 / 24.0) / nf;

    let log_pref = nf * kappa_star - lambda.ln();
    let log_cdf1 = log_pref + b.b0.ln();
    let cdf_bracket = b.b0
        + z3 * b.b3 / (6.0 * nf.sqrt())
        + z4 * b.b4 / (24.0 * nf)
        + z3 * z3 * b.b6 / (opts.cdf.divisor() * nf);
    let log_cdf2 = log_pref + cdf_bracket.ln();

    Ok(SaddlepointResult {
        n,
        x,
        theta_x: theta,
        kappa_star,
        lambda_n: lambda,
        zeta3: z3,
        zeta4: z4,
        pdf1: log_pdf1.exp(),
        pdf2: log_pdf1.exp() * pdf_bracket,
        cdf1: log_cdf1.exp(),
        cdf2: log_cdf2.exp(),
        log_pdf1,
        log_cdf1,
        log_cdf2,
    })
}

/// Both expansions at the saddlepoint `θ(x)`.
pub fn saddlepoint(
    model: &LognormalModel,
    n: u32,
    x: f64,
    cfg: &QuadratureConfig,
    opts: SaddlepointOptions,
) -> Result<SaddlepointResult> {
    let s = theta_of_x(model, x, cfg)?;
    evaluate_at(n, x, &s.cumulants, opts)
}

fn check_order(order: u8) -> Result<()> {
    if order == 1 || order == 2 {
        Ok(())
    } else {
        Err(Error::Config(format!("order must be 1 or 2, got {order}")))
    }
}

/// Saddlepoint approximation to `fₙ(nx)` with the classical correction.
pub fn density_approx(model: &LognormalModel, n: u32, x: f64, order: u8, cfg: &QuadratureConfig) -> Result<f64> {
    check_order(order)?;
    let r = saddlepoint(model, n, x, cfg, SaddlepointOptions::default())?;
    Ok(if order == 1 { r.pdf1 } else { r.pdf2 })
}

/// Saddlepoint approximation to `Fₙ(nx)` with the standard correction.
pub fn cdf_approx(model: &LognormalModel, n: u32, x: f64, order: u8, cfg: &QuadratureConfig) -> Result<f64> {
    check_order(order)?;
    let r = saddlepoint(model, n, x, cfg, SaddlepointOptions::default())?;
    Ok(if order == 1 { r.cdf1 } else { r.cdf2 })
}

/// `e^{1−σ²}`; the lognormal density is logconcave below this point.
pub fn logconcavity_bound(model: &LognormalModel) -> f64 {
    (1.0 - model.sigma2()).exp()
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn cdf_is_a_probability_increasing_in_x(s in 0.05f64..0.5, n in 2u32..64, x in 0.5f64..0.95) {
            let model = LognormalModel::new(s).unwrap();
            let cfg = QuadratureConfig::default();
            let a = saddlepoint(&model, n, x, &cfg, SaddlepointOptions::default()).unwrap();
            let b = saddlepoint(&model, n, x + 0.01, &cfg, SaddlepointOptions::default()).unwrap();
            prop_assert!(a.log_cdf2.is_finite() && a.log_cdf2 < 0.0 && a.pdf2 >= 0.0);
            prop_assert!(b.log_cdf2 > a.log_cdf2);
        }
    }
}
