//! Principal branch of the Lambert W function on `[0, ∞)`.
//!
//! `W(a)` is the unique `w ≥ 0` with `w·e^w = a`. Every asymptotic formula for
//! the tilted lognormal family is expressed through it.

use std::f64::consts::E;

use crate::error::{Error, Result};

const MAX_ITER: usize = 12;

/// Lambert W, principal branch, for `a ≥ 0`.
///
/// Uses Fritsch's iteration from `log(1 + a)` (small `a`) or
/// `log a − log log a` (large `a`); two or three steps reach full precision.
pub fn lambert_w(a: f64) -> Result<f64> {
    if !a.is_finite() || a < 0.0 {
        return Err(Error::domain("Lambert W needs a finite nonnegative argument", a));
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    Ok(w0_positive(a))
}

/// Kernel without the domain check; `a` must be positive and finite.
pub(crate) fn w0_positive(a: f64) -> f64 {
    let mut w = if a <= E {
        a.ln_1p()
    } else {
        let l = a.ln();
        l - l.ln()
    };
    if w == 0.0 {
        // a is subnormal or tiny enough that ln_1p rounds to zero
        return a;
    }
    for _ in 0..MAX_ITER {
        let z = (a / w).ln() - w;
        let w1 = 1.0 + w;
        let q = 2.0 * w1 * (w1 + 2.0 * z / 3.0);
        let eps = z / w1 * (q - z) / (q - 2.0 * z);
        w *= 1.0 + eps;
        if eps.abs() <= 4.0 * f64::EPSILON {
            break;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect(a: f64) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64.max(a.ln() + 1.0));
        for _ in 0..4000 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if mid * mid.exp() < a {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn exact_points() {
        assert_eq!(lambert_w(0.0).unwrap(), 0.0);
        assert!((lambert_w(E).unwrap() - 1.0).abs() < 1e-15);
        let a = 23.1845282 * 0.25 * 0.25;
        let w = lambert_w(a).unwrap();
        assert!((w * w.exp() - a).abs() < 1e-14);
        assert!((w - bisect(a)).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(lambert_w(-1e-300).is_err());
        assert!(lambert_w(f64::NAN).is_err());
        assert!(lambert_w(f64::INFINITY).is_err());
    }

    #[test]
    fn round_trip_log_grid() {
        let n = 1_000_000;
        let (lo, hi) = (-12.0_f64, 12.0_f64);
        let mut prev = 0.0;
        for i in 0..n {
            let a = 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64);
            let w = lambert_w(a).unwrap();
            let res = (w * w.exp() - a).abs() / a.max(1.0);
            assert!(res <= 1e-13, "a = {a:e}: residual {res:e}");
            assert!(w > prev, "not monotone at a = {a:e}");
            prev = w;
        }
    }

    #[test]
    fn matches_bisection() {
        let mut state = 0x9e3779b97f4a7c15_u64;
        for _ in 0..1000 {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let u = (state >> 11) as f64 / (1u64 << 53) as f64;
            let a = 10f64.powf(-12.0 + 24.0 * u);
            let (w, b) = (lambert_w(a).unwrap(), bisect(a));
            assert!((w - b).abs() <= 1e-12 * b, "a = {a:e}: {w} vs {b}");
        }
    }

    #[test]
    fn first_order_asymptotics() {
        let a = 1e10_f64;
        let ratio = lambert_w(a).unwrap() / (a.ln() - a.ln().ln());
        assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn tiny_arguments() {
        for a in [1e-300, 1e-200, 1e-30, 1e-16] {
            let w = lambert_w(a).unwrap();
            assert!((w - a).abs() <= 2.0 * a * a + 1e-16 * a);
        }
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn inverts_w_exp_w(e in -8.0f64..8.0) {
            let a = 10f64.powf(e);
            let w = lambert_w(a).unwrap();
            prop_assert!(w >= 0.0);
            prop_assert!((w * w.exp() - a).abs() <= 1e-12 * a);
        }
    }
}
