//! Normal-distribution helpers and the Mills ratio.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

/// `1 / sqrt(2π)`.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Mills ratio `R(λ) = Φ(−λ)/φ(λ)` for `λ ≥ 0`.
///
/// Below 4 the erfc product is accurate; above, a Lentz continued fraction avoids
/// forming `e^{λ²/2}` at all.
pub fn mills_ratio(lambda: f64) -> f64 {
    debug_assert!(lambda >= 0.0);
    if lambda < 4.0 {
        return 0.5 * erfc(lambda * FRAC_1_SQRT_2) * (2.0 * PI).sqrt() * (0.5 * lambda * lambda).exp();
    }
    // R = 1/(λ + 1/(λ + 2/(λ + 3/(λ + ...))))
    let tiny = 1e-300;
    let mut f = lambda;
    let mut c = lambda;
    let mut d = 0.0;
    for j in 1..500 {
        let a = j as f64;
        d = lambda + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = lambda + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// Natural log of the standard normal CDF, stable far into the left tail.
pub fn ln_normal_cdf(x: f64) -> f64 {
    if x > -4.0 {
        normal_cdf(x).ln()
    } else {
        let l = -x;
        mills_ratio(l).ln() - 0.5 * l * l - 0.5 * (2.0 * PI).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(-2.0) - 0.022_750_131_948_179_2).abs() < 1e-16);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-15);
    }

    #[test]
    fn mills_branches_agree_at_switch() {
        let a = 0.5 * erfc(4.0 * FRAC_1_SQRT_2) * (2.0 * PI).sqrt() * 8f64.exp();
        let b = mills_ratio(4.0);
        assert!((a - b).abs() < 1e-13 * b, "{a} vs {b}");
        let a = 0.5 * erfc(6.0 * FRAC_1_SQRT_2) * (2.0 * PI).sqrt() * 18f64.exp();
        assert!((a - mills_ratio(6.0)).abs() < 1e-12 * a);
    }

    #[test]
    fn mills_large_argument_series() {
        let l = 50.0_f64;
        let s = (1.0 - 1.0 / (l * l) + 3.0 / l.powi(4) - 15.0 / l.powi(6) + 105.0 / l.powi(8) - 945.0 / l.powi(10)) / l;
        assert!((mills_ratio(l) - s).abs() < 1e-13 * s);
    }

    #[test]
    fn ln_cdf_far_tail() {
        // ln Φ(−40) from the asymptotic series
        let l = 40.0_f64;
        let expect = -0.5 * l * l - l.ln() - 0.5 * (2.0 * PI).ln() + (1.0 - 1.0 / (l * l) + 3.0 / l.powi(4) - 15.0 / l.powi(6) + 105.0 / l.powi(8)).ln();
        assert!((ln_normal_cdf(-l) - expect).abs() < 1e-12 * expect.abs());
        assert!((ln_normal_cdf(-3.9) - normal_cdf(-3.9).ln()).abs() < 1e-12);
    }
}
