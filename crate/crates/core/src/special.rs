//! Gamma-family special functions needed by the Gamma-CDF market potential.
//!
//! `gamma_p` is the regularized lower incomplete gamma function P(a, x),
//! evaluated by the power series for `x < a + 1` and by the Lentz continued
//! fraction for the complement otherwise.

use crate::error::{domain, Result};

const MAX_ITER: usize = 500;
const EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;

/// Lanczos coefficients (g = 7, n = 9).
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural logarithm of Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma function P(a, x).
pub fn gamma_p(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return domain(format!("gamma_p: shape must be positive and finite, got {a}"));
    }
    if x.is_nan() || x < 0.0 {
        return domain(format!("gamma_p: x must be non-negative, got {x}"));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    if x < a + 1.0 {
        Ok(series(a, x))
    } else {
        Ok(1.0 - continued_fraction(a, x))
    }
}

/// Density of the Gamma distribution with the given rate and shape.
pub fn gamma_density(x: f64, rate: f64, shape: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        return match shape {
            s if s < 1.0 => f64::INFINITY,
            1.0 => rate,
            _ => 0.0,
        };
    }
    (shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(shape)).exp()
}

fn prefactor(a: f64, x: f64) -> f64 {
    (a * x.ln() - x - ln_gamma(a)).exp()
}

fn series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum * prefactor(a, x)).min(1.0)
}

/// Upper regularized Q(a, x) by modified Lentz.
fn continued_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (prefactor(a, x) * h).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0_f64;
        for n in 1..20 {
            let lg = ln_gamma(n as f64);
            assert!((lg - fact.ln()).abs() < 1e-12 * fact.ln().abs().max(1.0), "n={n}");
            fact *= n as f64;
        }
        let half = ln_gamma(0.5);
        assert!((half - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
    }

    #[test]
    fn shape_one_is_exponential() {
        for x in [0.1f64, 1.0, 2.5, 7.0, 30.0] {
            let p = gamma_p(1.0, x).unwrap();
            let expected = -(-x).exp_m1();
            assert!((p - expected).abs() < 1e-14 * expected.max(1e-300) + 1e-16, "x={x}");
        }
    }

    #[test]
    fn integer_shape_closed_form() {
        // P(3, x) = 1 - e^{-x}(1 + x + x^2/2)
        for x in [0.3f64, 2.0, 4.0, 9.0, 25.0] {
            let expected = 1.0 - (-x).exp() * (1.0 + x + x * x / 2.0);
            let p = gamma_p(3.0, x).unwrap();
            assert!((p - expected).abs() < 1e-13, "x={x}: {p} vs {expected}");
        }
    }

    #[test]
    fn continuity_across_regime_switch() {
        let a = 4.2;
        let below = gamma_p(a, a + 1.0 - 1e-9).unwrap();
        let above = gamma_p(a, a + 1.0 + 1e-9).unwrap();
        assert!((below - above).abs() < 1e-8);
    }

    #[test]
    fn domain_errors() {
        assert!(gamma_p(0.0, 1.0).is_err());
        assert!(gamma_p(-1.0, 1.0).is_err());
        assert!(gamma_p(1.0, -0.1).is_err());
        assert_eq!(gamma_p(2.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn density_integrates_to_cdf_difference() {
        // Simpson over [2, 6] for shape 2.5, rate 0.7
        let (rate, shape) = (0.7, 2.5);
        let (a, b, n) = (2.0, 6.0, 2000);
        let h = (b - a) / n as f64;
        let mut s = gamma_density(a, rate, shape) + gamma_density(b, rate, shape);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * gamma_density(a + i as f64 * h, rate, shape);
        }
        let integral = s * h / 3.0;
        let diff = gamma_p(shape, rate * b).unwrap() - gamma_p(shape, rate * a).unwrap();
        assert!((integral - diff).abs() < 1e-12);
    }
}
