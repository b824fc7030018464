//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the library's quadrature: integrals are taken in
//! the original variable `x` with an adaptive Gauss-Kronrod (7, 15) rule.

#![allow(dead_code)]

use std::f64::consts::PI;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One G7/K15 panel: the Kronrod value and `|K − G|`.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let d = h * XGK[j];
        let s = f(c - d) + f(c + d);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive bisection until every panel's error estimate is below `rel`
/// times the panel's value or below `abs`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel: f64, abs: f64) -> f64 {
    let mut stack = vec![(a, b, 0u32)];
    let mut total = 0.0;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, e) = gk15(f, lo, hi);
        if depth >= 50 || e <= rel * v.abs() || e <= abs {
            total += v;
        } else {
            let m = 0.5 * (lo + hi);
            stack.push((lo, m, depth + 1));
            stack.push((m, hi, depth + 1));
        }
    }
    total
}

/// `ln` of `∫₀^∞ x^k e^{−θx} f(x) dx` for `f` the LN(0, σ²) density.
///
/// The integrand is scaled by its peak and the half-line is cut at
/// `x = e^{y* + j s}` around the peak `y*` of the integrand in `log x`.
pub fn log_laplace_oracle(sigma: f64, theta: f64, k: u32) -> f64 {
    let s2 = sigma * sigma;
    let kf = f64::from(k);
    // peak of k·y − θe^y − y²/2σ² by bisection on its derivative
    let d = |y: f64| kf - theta * y.exp() - y / s2;
    let (mut lo, mut hi) = (-200.0_f64, 200.0_f64);
    for _ in 0..300 {
        let m = 0.5 * (lo + hi);
        if d(m) > 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    let ys = 0.5 * (lo + hi);
    let logx = |x: f64| kf * x.ln() - theta * x - x.ln().powi(2) / (2.0 * s2) - x.ln();
    let peak = logx(ys.exp());
    let f = |x: f64| if x > 0.0 { (logx(x) - peak).exp() } else { 0.0 };
    let step = 1.0 / (theta * ys.exp() + 1.0 / s2).sqrt();
    // the whole integral is of order x*·step
    let abs = 1e-17 * ys.exp() * step;
    let mut sum = 0.0;
    for j in -60..60 {
        let a = (ys + f64::from(j) * step).exp();
        let b = (ys + f64::from(j + 1) * step).exp();
        sum += integrate(&f, a, b, 1e-13, abs);
    }
    sum.ln() + peak - 0.5 * (2.0 * PI * s2).ln()
}

pub fn lognormal_pdf(sigma: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (-(x.ln().powi(2)) / (2.0 * sigma * sigma)).exp() / (x * sigma * (2.0 * PI).sqrt())
}

/// `Φ` from a Lentz continued fraction for `erfc` on `x ≥ 1.5` and the
/// Taylor series of `erf` below it.
pub fn normal_cdf(z: f64) -> f64 {
    let x = z.abs() / 2f64.sqrt();
    let erfc = if x < 1.5 {
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -x * x / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        1.0 - 2.0 / PI.sqrt() * sum
    } else {
        // erfc(x) = e^{−x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
        let tiny = 1e-300;
        let mut f = x;
        let mut c = x;
        let mut dd = 0.0;
        for j in 1..300 {
            let a = 0.5 * f64::from(j);
            dd = x + a * dd;
            if dd.abs() < tiny {
                dd = tiny;
            }
            c = x + a / c;
            if c.abs() < tiny {
                c = tiny;
            }
            dd = 1.0 / dd;
            let delta = c * dd;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x * x).exp() / PI.sqrt() / f
    };
    if z < 0.0 {
        0.5 * erfc
    } else {
        1.0 - 0.5 * erfc
    }
}

pub fn lognormal_cdf(sigma: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        normal_cdf(x.ln() / sigma)
    }
}

/// Density of `X₁ + X₂` at `s`.
pub fn conv2_pdf(sigma: f64, s: f64) -> f64 {
    let f = |t: f64| lognormal_pdf(sigma, t) * lognormal_pdf(sigma, s - t);
    2.0 * integrate(&f, 0.0, 0.5 * s, 1e-12, 1e-18)
}

/// `P(X₁ + X₂ ≤ s)`.
pub fn conv2_cdf(sigma: f64, s: f64) -> f64 {
    let f = |t: f64| lognormal_pdf(sigma, t) * lognormal_cdf(sigma, s - t);
    integrate(&f, 0.0, s, 1e-12, 1e-18)
}

/// Two-sided CI overlap of `a ± ha` and `b ± hb`.
pub fn overlaps(a: f64, ha: f64, b: f64, hb: f64) -> bool {
    (a - b).abs() <= ha + hb
}
