//! Closed-form evaluation of the diffusion curves.
//!
//! Covers the Bass curve, the dynamic market potentials, and the two-brand
//! competition trajectories sharing one potential `m(t)`. Cumulative sales of
//! each brand are written as `z_i(t) = m(t) * u_i(t)` where the fractions
//! `u_i` do not depend on the potential at all; every branch below computes
//! the fractions and scales by `m(t)` at the end.

use serde::{Deserialize, Serialize};

use crate::error::{domain, DiffusionError, Result};
use crate::special::{gamma_density, gamma_p};

/// Threshold on `delta` (1/month) below which the closed form switches to a
/// limiting branch.
pub const DELTA_EPS: f64 = 1e-9;

/// Classic Bass parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BassParams {
    pub m: f64,
    pub p: f64,
    pub q: f64,
}

impl BassParams {
    pub fn new(m: f64, p: f64, q: f64) -> Result<Self> {
        let params = Self { m, p, q };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m.is_finite()) {
            return domain(format!("Bass potential must be positive, got {}", self.m));
        }
        if !(self.p > 0.0 && self.p.is_finite()) {
            return domain(format!("Bass innovation coefficient must be positive, got {}", self.p));
        }
        if !(self.q >= 0.0 && self.q.is_finite()) {
            return domain(format!("Bass imitation coefficient must be non-negative, got {}", self.q));
        }
        Ok(())
    }
}

/// Family of the market-potential function, also used to select the model
/// that is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Square-root Bass potential `K sqrt(w(t; p_c, q_c))`.
    Cdmp,
    /// Fixed potential `m`.
    Constant,
    /// `K w(t; p_c, q_c)` without the square root.
    #[serde(rename = "gg-nosqrt")]
    GgNoSqrt,
    /// `K` times a Gamma cumulative distribution function.
    Gamma,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Cdmp,
        ModelKind::Constant,
        ModelKind::GgNoSqrt,
        ModelKind::Gamma,
    ];

    /// Names of the potential parameters, in vector order.
    pub fn potential_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Constant => &["m"],
            ModelKind::Cdmp | ModelKind::GgNoSqrt => &["K", "p_c", "q_c"],
            ModelKind::Gamma => &["K", "alpha0", "alpha1"],
        }
    }

    /// Names of the full parameter vector.
    pub fn param_names(self) -> Vec<&'static str> {
        let mut names = self.potential_names().to_vec();
        names.extend_from_slice(&BRAND_NAMES);
        names
    }

    pub fn n_params(self) -> usize {
        self.potential_names().len() + BRAND_NAMES.len()
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Cdmp => "cdmp",
            ModelKind::Constant => "constant",
            ModelKind::GgNoSqrt => "gg-nosqrt",
            ModelKind::Gamma => "gamma",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = DiffusionError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cdmp" | "gg-sqrt" | "ggsqrt" => Ok(ModelKind::Cdmp),
            "constant" => Ok(ModelKind::Constant),
            "gg-nosqrt" | "ggnosqrt" => Ok(ModelKind::GgNoSqrt),
            "gamma" | "gamma-cdf" => Ok(ModelKind::Gamma),
            other => Err(DiffusionError::InvalidConfig(format!("unknown model '{other}'"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

const BRAND_NAMES: [&str; 5] = ["p1", "q1", "p2", "q2", "delta"];

/// Market potential `m(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum PotentialSpec {
    Constant { m: f64 },
    GgSqrt { k: f64, p_c: f64, q_c: f64 },
    GgNoSqrt { k: f64, p_c: f64, q_c: f64 },
    /// `rate` is the Gamma rate α₀, `shape` the Gamma shape α₁.
    GammaCdf { k: f64, rate: f64, shape: f64 },
}

impl PotentialSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            PotentialSpec::Constant { .. } => ModelKind::Constant,
            PotentialSpec::GgSqrt { .. } => ModelKind::Cdmp,
            PotentialSpec::GgNoSqrt { .. } => ModelKind::GgNoSqrt,
            PotentialSpec::GammaCdf { .. } => ModelKind::Gamma,
        }
    }

    /// Asymptotic level `lim m(t)`.
    pub fn ceiling(&self) -> f64 {
        match *self {
            PotentialSpec::Constant { m } => m,
            PotentialSpec::GgSqrt { k, .. }
            | PotentialSpec::GgNoSqrt { k, .. }
            | PotentialSpec::GammaCdf { k, .. } => k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                domain(format!("potential parameter {name} must be positive and finite, got {v}"))
            }
        };
        match *self {
            PotentialSpec::Constant { m } => positive("m", m),
            PotentialSpec::GgSqrt { k, p_c, q_c } | PotentialSpec::GgNoSqrt { k, p_c, q_c } => {
                positive("K", k)?;
                positive("p_c", p_c)?;
                positive("q_c", q_c)
            }
            PotentialSpec::GammaCdf { k, rate, shape } => {
                positive("K", k)?;
                positive("alpha0", rate)?;
                positive("alpha1", shape)
            }
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        match *self {
            PotentialSpec::Constant { m } => vec![m],
            PotentialSpec::GgSqrt { k, p_c, q_c } | PotentialSpec::GgNoSqrt { k, p_c, q_c } => {
                vec![k, p_c, q_c]
            }
            PotentialSpec::GammaCdf { k, rate, shape } => vec![k, rate, shape],
        }
    }

    pub fn from_slice(kind: ModelKind, v: &[f64]) -> Result<Self> {
        let want = kind.potential_names().len();
        if v.len() != want {
            return Err(DiffusionError::InvalidConfig(format!(
                "{kind} potential needs {want} values, got {}",
                v.len()
            )));
        }
        Ok(match kind {
            ModelKind::Constant => PotentialSpec::Constant { m: v[0] },
            ModelKind::Cdmp => PotentialSpec::GgSqrt { k: v[0], p_c: v[1], q_c: v[2] },
            ModelKind::GgNoSqrt => PotentialSpec::GgNoSqrt { k: v[0], p_c: v[1], q_c: v[2] },
            ModelKind::Gamma => PotentialSpec::GammaCdf { k: v[0], rate: v[1], shape: v[2] },
        })
    }

    /// Returns the same family with its magnitude multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = *self;
        match &mut out {
            PotentialSpec::Constant { m } => *m *= c,
            PotentialSpec::GgSqrt { k, .. }
            | PotentialSpec::GgNoSqrt { k, .. }
            | PotentialSpec::GammaCdf { k, .. } => *k *= c,
        }
        out
    }
}

/// Full parameter vector of the two-brand competition model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompetitionParams {
    pub potential: PotentialSpec,
    pub p1: f64,
    pub q1: f64,
    pub p2: f64,
    pub q2: f64,
    pub delta: f64,
}

impl CompetitionParams {
    /// Estimates reported for the two-brand glimepiride case study
    /// (square-root potential, monthly data from January 1999).
    pub fn case_study() -> Self {
        Self {
            potential: PotentialSpec::GgSqrt {
                k: 4.8669e7,
                p_c: 2.3837e-3,
                q_c: 4.5235e-2,
            },
            p1: 3.2004e-3,
            q1: 1.4277e-2,
            p2: -7.9208e-4,
            q2: 1.2709e-3,
            delta: -2.2248e-2,
        }
    }

    pub fn p_s(&self) -> f64 {
        self.p1 + self.p2
    }

    pub fn q_s(&self) -> f64 {
        self.q1 + self.q2
    }

    pub fn kind(&self) -> ModelKind {
        self.potential.kind()
    }

    pub fn validate(&self) -> Result<()> {
        self.potential.validate()?;
        for (name, v) in [
            ("p1", self.p1),
            ("q1", self.q1),
            ("p2", self.p2),
            ("q2", self.q2),
            ("delta", self.delta),
        ] {
            if !v.is_finite() {
                return domain(format!("{name} must be finite, got {v}"));
            }
        }
        if !(self.p_s() > 0.0) {
            return domain(format!("p1 + p2 must be positive, got {}", self.p_s()));
        }
        if !(self.q_s() > 0.0) {
            return domain(format!("q1 + q2 must be positive, got {}", self.q_s()));
        }
        Ok(())
    }

    /// Flattens to `[potential..., p1, q1, p2, q2, delta]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.potential.to_vec();
        v.extend_from_slice(&[self.p1, self.q1, self.p2, self.q2, self.delta]);
        v
    }

    pub fn from_slice(kind: ModelKind, v: &[f64]) -> Result<Self> {
        let np = kind.potential_names().len();
        if v.len() != np + 5 {
            return Err(DiffusionError::InvalidConfig(format!(
                "{kind} model needs {} values, got {}",
                np + 5,
                v.len()
            )));
        }
        let b = &v[np..];
        Ok(Self {
            potential: PotentialSpec::from_slice(kind, &v[..np])?,
            p1: b[0],
            q1: b[1],
            p2: b[2],
            q2: b[3],
            delta: b[4],
        })
    }
}

/// Bass fraction `w(t; p, q)`.
pub fn bass_w(t: f64, p: f64, q: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return domain(format!("time must be non-negative, got {t}"));
    }
    if !(p > 0.0) || !(p + q > 0.0) {
        return domain(format!("need p > 0 and p + q > 0, got p = {p}, q = {q}"));
    }
    Ok(bass_w_unchecked(t, p, q))
}

#[inline]
fn bass_w_unchecked(t: f64, p: f64, q: f64) -> f64 {
    let x = -(p + q) * t;
    let e = x.exp();
    -x.exp_m1() / (1.0 + (q / p) * e)
}

/// Time derivative of `w(t; p, q)`, which satisfies `w' = (p + q w)(1 - w)`.
#[inline]
fn bass_w_rate(w: f64, p: f64, q: f64) -> f64 {
    (p + q * w) * (1.0 - w)
}

pub fn bass_cumulative(t: f64, params: &BassParams) -> Result<f64> {
    params.validate()?;
    Ok(params.m * bass_w(t, params.p, params.q)?)
}

/// Instantaneous Bass sales `z'(t)`.
pub fn bass_rate(t: f64, params: &BassParams) -> Result<f64> {
    params.validate()?;
    let w = bass_w(t, params.p, params.q)?;
    Ok(params.m * bass_w_rate(w, params.p, params.q))
}

/// Evaluates `m(t)`.
pub fn market_potential(t: f64, spec: &PotentialSpec) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return domain(format!("time must be non-negative, got {t}"));
    }
    spec.validate()?;
    Ok(match *spec {
        PotentialSpec::Constant { m } => m,
        PotentialSpec::GgSqrt { k, p_c, q_c } => k * bass_w_unchecked(t, p_c, q_c).sqrt(),
        PotentialSpec::GgNoSqrt { k, p_c, q_c } => k * bass_w_unchecked(t, p_c, q_c),
        PotentialSpec::GammaCdf { k, rate, shape } => k * gamma_p(shape, rate * t)?,
    })
}

/// Evaluates `m'(t)`. The square-root potential has an unbounded slope at
/// `t = 0`, so that variant requires `t > 0`.
pub fn market_potential_derivative(t: f64, spec: &PotentialSpec) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return domain(format!("time must be non-negative, got {t}"));
    }
    spec.validate()?;
    Ok(match *spec {
        PotentialSpec::Constant { .. } => 0.0,
        PotentialSpec::GgSqrt { k, p_c, q_c } => {
            if t == 0.0 {
                return domain("square-root potential has no finite derivative at t = 0");
            }
            let w = bass_w_unchecked(t, p_c, q_c);
            k * bass_w_rate(w, p_c, q_c) / (2.0 * w.sqrt())
        }
        PotentialSpec::GgNoSqrt { k, p_c, q_c } => {
            let w = bass_w_unchecked(t, p_c, q_c);
            k * bass_w_rate(w, p_c, q_c)
        }
        PotentialSpec::GammaCdf { k, rate, shape } => {
            let d = k * rate * gamma_density(rate * t, 1.0, shape);
            if !d.is_finite() {
                return domain("Gamma potential with shape < 1 has no finite derivative at t = 0");
            }
            d
        }
    })
}

/// Auxiliary curve `y(t) = 1 + (q_s/p_s) w(t; p_s, q_s)`.
pub fn aux_y(t: f64, p_s: f64, q_s: f64) -> Result<f64> {
    if !(p_s > 0.0) {
        return domain(format!("p_s must be positive, got {p_s}"));
    }
    Ok(1.0 + (q_s / p_s) * bass_w(t, p_s, q_s)?)
}

/// `(y^(delta/q_s) - 1) / (delta/q_s)`, equal to `ln y` at `delta = 0`.
pub fn power_ratio(y: f64, delta: f64, q_s: f64) -> Result<f64> {
    if y.is_nan() || y < 1.0 {
        return domain(format!("power_ratio needs y >= 1, got {y}"));
    }
    if q_s == 0.0 || !q_s.is_finite() {
        return domain(format!("power_ratio needs finite non-zero q_s, got {q_s}"));
    }
    let ln_y = y.ln();
    let a = delta / q_s;
    if a == 0.0 {
        Ok(ln_y)
    } else {
        Ok((a * ln_y).exp_m1() / a)
    }
}

/// Potential-free fractions `(u1, u2)` with `z_i = m(t) u_i`.
fn brand_fractions(t: f64, params: &CompetitionParams) -> Result<(f64, f64)> {
    let (p_s, q_s) = (params.p_s(), params.q_s());
    let CompetitionParams { p1, q1, p2, q2, delta, .. } = *params;
    let w = bass_w(t, p_s, q_s)?;
    let y = 1.0 + (q_s / p_s) * w;

    if delta.abs() <= DELTA_EPS {
        let ln_y = y.ln();
        let u1 = q1 / q_s * w + p_s / q_s * (p1 / p_s - q1 / q_s) * ln_y;
        let u2 = q2 / q_s * w + p_s / q_s * (p2 / p_s - q2 / q_s) * ln_y;
        Ok((u1, u2))
    } else if (delta - q_s).abs() <= DELTA_EPS {
        let c = q1 * p_s / (q_s * q_s) * y * y.ln();
        let a = p1 / p_s - q1 / q_s;
        Ok((a * w + c, (1.0 - a) * w - c))
    } else {
        // u_i = (p_i/q_s) R + c_i G with c_1 = q1, c_2 = q2 - delta, where
        // R = power_ratio and G = (w - (p_s/q_s) R) / (q_s - delta).
        let r = power_ratio(y, delta, q_s)?;
        let g = (w - p_s / q_s * r) / (q_s - delta);
        let u1 = p1 / q_s * r + q1 * g;
        let u2 = p2 / q_s * r + (q2 - delta) * g;
        Ok((u1, u2))
    }
}

/// Cumulative sales `(z1(t), z2(t))` of the two brands.
pub fn brand_trajectories(t: f64, params: &CompetitionParams) -> Result<(f64, f64)> {
    params.validate()?;
    let m = market_potential(t, &params.potential)?;
    let (u1, u2) = brand_fractions(t, params)?;
    Ok((m * u1, m * u2))
}

/// Right-hand side of the competition system at the closed-form state,
/// including the self-reinforcing terms `z_i m'/m`.
pub fn instantaneous_rates(t: f64, params: &CompetitionParams) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return domain(format!("instantaneous rates need t > 0, got {t}"));
    }
    params.validate()?;
    let m = market_potential(t, &params.potential)?;
    let dm = market_potential_derivative(t, &params.potential)?;
    let (u1, u2) = brand_fractions(t, params)?;
    let u = u1 + u2;
    if u > 1.0 + 1e-12 {
        return domain(format!("category fraction {u} exceeds the market potential at t = {t}"));
    }
    Ok(competition_rhs(params, m, dm, u1, u2))
}

/// Right-hand side written on fractions: `z_i' = m A_i (1 - u) + u_i m'`.
#[inline]
pub(crate) fn competition_rhs(params: &CompetitionParams, m: f64, dm: f64, u1: f64, u2: f64) -> (f64, f64) {
    let CompetitionParams { p1, q1, p2, q2, delta, .. } = *params;
    let residual = 1.0 - u1 - u2;
    let a1 = p1 + (q1 + delta) * u1 + q1 * u2;
    let a2 = p2 + (q2 - delta) * u1 + q2 * u2;
    (m * a1 * residual + u1 * dm, m * a2 * residual + u2 * dm)
}

/// Coefficients of one brand's proportional form
/// `innovation + within_brand * z_own/m + cross_brand * z_other/m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WordOfMouth {
    pub innovation: f64,
    pub within_brand: f64,
    pub cross_brand: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCoefficients {
    pub brand1: WordOfMouth,
    pub brand2: WordOfMouth,
}

pub fn effective_coefficients(params: &CompetitionParams) -> EffectiveCoefficients {
    EffectiveCoefficients {
        brand1: WordOfMouth {
            innovation: params.p1,
            within_brand: params.q1 + params.delta,
            cross_brand: params.q1,
        },
        brand2: WordOfMouth {
            innovation: params.p2,
            within_brand: params.q2,
            cross_brand: params.q2 - params.delta,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    fn sym(potential: PotentialSpec) -> CompetitionParams {
        CompetitionParams { potential, p1: 0.01, q1: 0.05, p2: 0.01, q2: 0.05, delta: 0.0 }
    }

    #[test]
    fn bass_w_edges() {
        assert_eq!(bass_w(0.0, 0.01, 0.1).unwrap(), 0.0);
        assert_eq!(bass_w(f64::INFINITY, 0.01, 0.1).unwrap(), 1.0);
        assert!((bass_w(1e4, 0.03, 0.4).unwrap() - 1.0).abs() < 1e-15);
        assert!(bass_w(-1.0, 0.01, 0.1).is_err());
        assert!(bass_w(1.0, 0.0, 0.1).is_err());
        assert!(bass_w(1.0, -0.01, 0.1).is_err());
    }

    #[test]
    fn bass_w_pure_exponential() {
        let w = bass_w(3.0, 0.2, 0.0).unwrap();
        assert!((w - (1.0 - (-0.6f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn bass_cumulative_limits() {
        let bp = BassParams::new(1000.0, 0.01, 0.1).unwrap();
        assert_eq!(bass_cumulative(0.0, &bp).unwrap(), 0.0);
        assert!((bass_cumulative(f64::INFINITY, &bp).unwrap() - 1000.0).abs() < 1e-12);
        assert!(BassParams::new(-1.0, 0.01, 0.1).is_err());
        assert!(BassParams::new(1.0, 0.01, -0.1).is_err());
    }

    #[test]
    fn potentials_at_limits() {
        let c = PotentialSpec::Constant { m: 100.0 };
        for t in [0.0, 1.0, 500.0] {
            assert_eq!(market_potential(t, &c).unwrap(), 100.0);
            assert_eq!(market_potential_derivative(t, &c).unwrap(), 0.0);
        }
        let gg = CompetitionParams::case_study().potential;
        assert!(rel(market_potential(f64::INFINITY, &gg).unwrap(), 4.8669e7) < 1e-15);
        let g = PotentialSpec::GammaCdf { k: 1.0, rate: 0.5, shape: 1.0 };
        let v = market_potential(5.0, &g).unwrap();
        assert!((v - (1.0 - (-2.5f64).exp())).abs() < 1e-14);
        assert!((v - 0.917915).abs() < 1e-6);
    }

    #[test]
    fn invalid_potential_rejected() {
        for spec in [
            PotentialSpec::Constant { m: 0.0 },
            PotentialSpec::GgSqrt { k: 1.0, p_c: -0.1, q_c: 0.1 },
            PotentialSpec::GgNoSqrt { k: 1.0, p_c: 0.1, q_c: 0.0 },
            PotentialSpec::GammaCdf { k: 1.0, rate: 0.1, shape: f64::NAN },
        ] {
            assert!(market_potential(1.0, &spec).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn sqrt_potential_derivative_singular_at_zero() {
        let gg = PotentialSpec::GgSqrt { k: 1.0, p_c: 0.01, q_c: 0.05 };
        assert!(market_potential_derivative(0.0, &gg).is_err());
        let nosqrt = PotentialSpec::GgNoSqrt { k: 1.0, p_c: 0.01, q_c: 0.05 };
        assert!((market_potential_derivative(0.0, &nosqrt).unwrap() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn aux_y_limits() {
        assert_eq!(aux_y(0.0, 0.3, 0.7).unwrap(), 1.0);
        assert!((aux_y(f64::INFINITY, 0.01, 0.1).unwrap() - 11.0).abs() < 1e-12);
        let y = aux_y(50.0, 0.0024, 0.0155).unwrap();
        let w = bass_w(50.0, 0.0024, 0.0155).unwrap();
        assert_eq!(y, 1.0 + 0.0155 / 0.0024 * w);
        assert!(aux_y(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn power_ratio_values() {
        assert!((power_ratio(std::f64::consts::E, 0.0, 0.1).unwrap() - 1.0).abs() < 1e-15);
        assert!((power_ratio(2.0, 1e-12, 0.1).unwrap() - 2f64.ln()).abs() < 1e-9);
        // (3^0.5 - 1)/0.5
        let v = power_ratio(3.0, 0.05, 0.1).unwrap();
        assert!((v - 1.464_101_615_137_754_6).abs() < 1e-14);
        assert!(power_ratio(0.99, 0.1, 0.1).is_err());
        assert!(power_ratio(2.0, 0.1, 0.0).is_err());
        assert_eq!(power_ratio(1.0, 0.3, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_brands_split_equally() {
        for pot in [
            PotentialSpec::Constant { m: 500.0 },
            PotentialSpec::GgSqrt { k: 500.0, p_c: 0.01, q_c: 0.1 },
            PotentialSpec::GammaCdf { k: 500.0, rate: 0.1, shape: 2.0 },
        ] {
            for t in [0.0, 3.0, 40.0] {
                let (z1, z2) = brand_trajectories(t, &sym(pot)).unwrap();
                assert!((z1 - z2).abs() <= 1e-12 * z1.abs().max(1.0));
            }
        }
    }

    #[test]
    fn reduces_to_bass() {
        let bp = BassParams::new(1000.0, 0.01, 0.1).unwrap();
        let params = CompetitionParams {
            potential: PotentialSpec::Constant { m: 1000.0 },
            p1: 0.01,
            q1: 0.1,
            p2: 0.0,
            q2: 0.0,
            delta: 0.0,
        };
        for t in [0.0, 1.0, 10.0, 24.0, 100.0] {
            let (z1, z2) = brand_trajectories(t, &params).unwrap();
            let z = bass_cumulative(t, &bp).unwrap();
            assert!((z1 - z).abs() <= 1e-12 * z.max(1.0), "t={t}: {z1} vs {z}");
            assert!(z2.abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_sums_rejected() {
        let mut p = CompetitionParams::case_study();
        p.p2 = -p.p1;
        assert!(brand_trajectories(1.0, &p).is_err());
        let mut p = CompetitionParams::case_study();
        p.q2 = -p.q1;
        assert!(brand_trajectories(1.0, &p).is_err());
    }

    #[test]
    fn sum_identity_on_case_study() {
        let p = CompetitionParams::case_study();
        let (z1, z2) = brand_trajectories(100.0, &p).unwrap();
        let expected = market_potential(100.0, &p.potential).unwrap() * bass_w(100.0, p.p_s(), p.q_s()).unwrap();
        assert!(rel(z1 + z2, expected) < 1e-12);
    }

    #[test]
    fn constant_potential_saturated_rates_vanish() {
        let p = CompetitionParams {
            potential: PotentialSpec::Constant { m: 10.0 },
            p1: 0.02,
            q1: 0.3,
            p2: 0.01,
            q2: 0.2,
            delta: 0.05,
        };
        let (r1, r2) = instantaneous_rates(1e4, &p).unwrap();
        assert!(r1.abs() < 1e-12 && r2.abs() < 1e-12);
        let (r1, r2) = competition_rhs(&p, 10.0, 0.0, 0.4, 0.6);
        assert_eq!((r1, r2), (0.0, 0.0));
    }

    #[test]
    fn rates_need_positive_time() {
        assert!(instantaneous_rates(0.0, &CompetitionParams::case_study()).is_err());
    }

    #[test]
    fn effective_coefficients_case_study() {
        let e = effective_coefficients(&CompetitionParams::case_study());
        assert_eq!(format!("{:.4}", e.brand1.within_brand), "-0.0080");
        assert_eq!(format!("{:.4}", e.brand2.cross_brand), "0.0235");
        assert_eq!(format!("{:.4}", e.brand1.cross_brand), "0.0143");
        assert_eq!(format!("{:.4}", e.brand2.within_brand), "0.0013");
        assert_eq!(format!("{:.4}", e.brand1.innovation), "0.0032");
        assert_eq!(format!("{:.4}", e.brand2.innovation), "-0.0008");

        let mut p = CompetitionParams::case_study();
        p.delta = 0.0;
        let e = effective_coefficients(&p);
        assert_eq!(e.brand1.within_brand, e.brand1.cross_brand);
        assert_eq!(e.brand2.within_brand, e.brand2.cross_brand);
    }

    #[test]
    fn vector_round_trip() {
        for kind in ModelKind::ALL {
            let v: Vec<f64> = (1..=kind.n_params()).map(|i| i as f64 * 0.1).collect();
            let p = CompetitionParams::from_slice(kind, &v).unwrap();
            assert_eq!(p.kind(), kind);
            assert_eq!(p.to_vec(), v);
            assert_eq!(kind.param_names().len(), v.len());
            assert_eq!(kind.label().parse::<ModelKind>().unwrap(), kind);
        }
        assert!(CompetitionParams::from_slice(ModelKind::Cdmp, &[1.0; 6]).is_err());
    }
}
