//! Seasonal ARMA refinement of fit residuals, by conditional least squares.
//!
//! The model for a residual series `e_t` with optional regressors `x_t` is
//! `φ(B) Φ(B^s) (e_t - βᵀx_t) = θ(B) Θ(B^s) a_t` with
//! `φ(B) = 1 - φ₁B - ...` and `θ(B) = 1 + θ₁B + ...`.

use nalgebra::{DMatrix, Schur};
use serde::{Deserialize, Serialize};

use crate::data::PerBrand;
use crate::error::{DiffusionError, Result};
use crate::lm::{self, LmConfig};

/// Roots of the fitted polynomials must stay this far inside the unit circle.
const UNIT_ROOT_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SarmaConfig {
    pub ar_order: usize,
    pub ma_order: usize,
    pub seasonal_ar_order: usize,
    pub seasonal_ma_order: usize,
    pub season_length: usize,
}

impl Default for SarmaConfig {
    fn default() -> Self {
        Self { ar_order: 1, ma_order: 0, seasonal_ar_order: 1, seasonal_ma_order: 0, season_length: 12 }
    }
}

impl SarmaConfig {
    pub fn n_coefficients(&self) -> usize {
        self.ar_order + self.ma_order + self.seasonal_ar_order + self.seasonal_ma_order
    }

    /// Observations consumed before the first conditional residual.
    fn burn_in(&self) -> usize {
        self.ar_order + self.season_length * self.seasonal_ar_order
    }

    pub fn validate(&self, n: usize, n_exog: usize) -> Result<()> {
        if self.season_length < 2 {
            return Err(DiffusionError::InvalidConfig("season length must be at least 2".into()));
        }
        if n < 3 * self.season_length {
            return Err(DiffusionError::InvalidData(format!(
                "{n} residuals are too few; need at least {}",
                3 * self.season_length
            )));
        }
        let k = self.n_coefficients() + n_exog;
        if 5 * k >= n {
            return Err(DiffusionError::InvalidConfig(format!(
                "{k} coefficients need more than {} residuals",
                5 * k
            )));
        }
        if self.burn_in() + k >= n {
            return Err(DiffusionError::InvalidData("series shorter than the AR lag span".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarmaCoefficients {
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub seasonal_ar: Vec<f64>,
    pub seasonal_ma: Vec<f64>,
    pub exog: Vec<f64>,
}

impl SarmaCoefficients {
    fn from_slice(cfg: &SarmaConfig, x: &[f64]) -> Self {
        let mut it = x.iter().copied();
        let mut take = |n: usize| (&mut it).take(n).collect::<Vec<_>>();
        Self {
            ar: take(cfg.ar_order),
            ma: take(cfg.ma_order),
            seasonal_ar: take(cfg.seasonal_ar_order),
            seasonal_ma: take(cfg.seasonal_ma_order),
            exog: take(usize::MAX),
        }
    }

    /// Full AR polynomial `φ(B)Φ(B^s)` as coefficients of `1, B, B², ...`.
    fn ar_polynomial(&self, s: usize) -> Vec<f64> {
        poly_mul(&lag_poly(&self.ar, 1, -1.0), &lag_poly(&self.seasonal_ar, s, -1.0))
    }

    fn ma_polynomial(&self, s: usize) -> Vec<f64> {
        poly_mul(&lag_poly(&self.ma, 1, 1.0), &lag_poly(&self.seasonal_ma, s, 1.0))
    }
}

/// `1 + sign·(c₁B^step + c₂B^{2 step} + ...)`.
fn lag_poly(c: &[f64], step: usize, sign: f64) -> Vec<f64> {
    let mut p = vec![0.0; c.len() * step + 1];
    p[0] = 1.0;
    for (i, v) in c.iter().enumerate() {
        p[(i + 1) * step] = sign * v;
    }
    p
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Largest root modulus of `z^d + c₁z^{d-1} + ... + c_d`, which is `1/|r|`
/// for the smallest root `r` of `1 + c₁B + ... + c_dB^d`. `None` if the
/// eigenvalue iteration does not settle.
fn max_inverse_root(poly: &[f64]) -> Option<f64> {
    let d = poly.iter().rposition(|v| *v != 0.0).unwrap_or(0);
    if d == 0 {
        return Some(0.0);
    }
    if d == 1 {
        return Some(poly[1].abs());
    }
    let mut companion = DMatrix::zeros(d, d);
    for j in 0..d {
        companion[(0, j)] = -poly[j + 1];
    }
    for i in 1..d {
        companion[(i, i - 1)] = 1.0;
    }
    let schur = Schur::try_new(companion, f64::EPSILON, 10_000)?;
    Some(schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Checks that `1 - c₁B - ...` has all roots outside the unit circle.
/// A seasonal factor in `B^s` has the same property as the factor in `B`.
fn check_unit_roots(coefs: &[f64], sign: f64, what: &str) -> Result<()> {
    let root = max_inverse_root(&lag_poly(coefs, 1, sign)).ok_or_else(|| {
        DiffusionError::Rejected(format!("could not locate the roots of the {what} polynomial"))
    })?;
    if root >= 1.0 - UNIT_ROOT_MARGIN {
        let kind = if sign < 0.0 { "stationary" } else { "invertible" };
        return Err(DiffusionError::Rejected(format!(
            "fitted {what} polynomial is not {kind} (largest inverse root {root:.6})"
        )));
    }
    Ok(())
}

/// Fitted refinement for one residual series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarmaFit {
    pub config: SarmaConfig,
    pub coefficients: SarmaCoefficients,
    /// Innovation variance over the conditional sample.
    pub sigma2: f64,
    pub n_used: usize,
    pub converged: bool,
    /// In-sample one-step predictions; the first `burn_in` entries are 0.
    pub one_step: Vec<f64>,
    /// Residual forecasts for the periods after the sample.
    pub forecast: Vec<f64>,
}

struct Filter<'a> {
    ar: Vec<f64>,
    ma: Vec<f64>,
    exog: &'a [f64],
    columns: &'a [Vec<f64>],
    start: usize,
}

impl Filter<'_> {
    fn regression(&self, t: usize) -> f64 {
        self.columns.iter().zip(self.exog).map(|(c, b)| c[t] * b).sum()
    }

    /// Conditional innovations `a_t`, zero before `start`.
    fn innovations(&self, e: &[f64]) -> Vec<f64> {
        let w: Vec<f64> = (0..e.len()).map(|t| e[t] - self.regression(t)).collect();
        let mut a = vec![0.0; e.len()];
        for t in self.start..e.len() {
            let mut v = w[t];
            for (j, c) in self.ar.iter().enumerate().skip(1) {
                v += c * w[t - j];
            }
            for (j, c) in self.ma.iter().enumerate().skip(1) {
                if t >= j {
                    v -= c * a[t - j];
                }
            }
            a[t] = v;
        }
        a
    }

    /// Continues the recursion `horizon` steps with zero future innovations.
    fn extend(&self, e: &[f64], a: &[f64], horizon: usize) -> Vec<f64> {
        let n = e.len();
        let mut w: Vec<f64> = (0..n).map(|t| e[t] - self.regression(t)).collect();
        let mut out = Vec::with_capacity(horizon);
        for t in n..n + horizon {
            let mut v = 0.0;
            for (j, c) in self.ar.iter().enumerate().skip(1) {
                if t >= j {
                    v -= c * w[t - j];
                }
            }
            for (j, c) in self.ma.iter().enumerate().skip(1) {
                if t >= j && t - j < n {
                    v += c * a[t - j];
                }
            }
            w.push(v);
            out.push(v + self.regression(t));
        }
        out
    }
}

/// Fits a seasonal ARMA without regressors and forecasts `horizon` periods.
pub fn fit_sarma(series: &[f64], config: &SarmaConfig, horizon: usize) -> Result<SarmaFit> {
    fit_sarmax(series, &[], config, horizon)
}

/// Fits with regressors. Each column of `exog` must cover the sample and the
/// forecast horizon.
pub fn fit_sarmax(series: &[f64], exog: &[Vec<f64>], config: &SarmaConfig, horizon: usize) -> Result<SarmaFit> {
    let n = series.len();
    config.validate(n, exog.len())?;
    if series.iter().any(|v| !v.is_finite()) {
        return Err(DiffusionError::InvalidData("residual series must be finite".into()));
    }
    if let Some(c) = exog.iter().find(|c| c.len() < n + horizon || c.iter().any(|v| !v.is_finite())) {
        return Err(DiffusionError::InvalidData(format!(
            "regressor has {} finite values, need {}",
            c.len(),
            n + horizon
        )));
    }
    let s = config.season_length;
    let start = config.burn_in();
    let k = config.n_coefficients() + exog.len();

    let make_filter = |x: &[f64]| {
        let c = SarmaCoefficients::from_slice(config, x);
        (c.ar_polynomial(s), c.ma_polynomial(s), c.exog)
    };
    let f = |x: &[f64]| {
        let (ar, ma, beta) = make_filter(x);
        let filt = Filter { ar, ma, exog: &beta, columns: exog, start };
        let a = filt.innovations(series);
        let r = a[start..].to_vec();
        r.iter().all(|v| v.is_finite()).then_some(r)
    };
    let lm_cfg = LmConfig { tolerance: 1e-12, ..LmConfig::default() };
    let out = lm::minimize(f, &vec![0.0; k], None, &lm_cfg)?;

    let coefficients = SarmaCoefficients::from_slice(config, &out.params);
    check_unit_roots(&coefficients.ar, -1.0, "AR")?;
    check_unit_roots(&coefficients.seasonal_ar, -1.0, "seasonal AR")?;
    check_unit_roots(&coefficients.ma, 1.0, "MA")?;
    check_unit_roots(&coefficients.seasonal_ma, 1.0, "seasonal MA")?;
    let (ar, ma) = (coefficients.ar_polynomial(s), coefficients.ma_polynomial(s));

    let filt = Filter { ar, ma, exog: &coefficients.exog, columns: exog, start };
    let a = filt.innovations(series);
    let one_step = (0..n).map(|t| if t < start { 0.0 } else { series[t] - a[t] }).collect();
    let forecast = filt.extend(series, &a, horizon);
    let n_used = n - start;
    Ok(SarmaFit {
        config: *config,
        sigma2: out.sse / n_used as f64,
        n_used,
        converged: out.converged(),
        coefficients,
        one_step,
        forecast,
    })
}

impl SarmaFit {
    /// One-step predictions over `series` with the fitted coefficients held
    /// fixed, e.g. a hold-out extension of the fitting sample. Entries before
    /// the lag span are 0. Regressor models need [`fit_sarmax`] data instead.
    pub fn one_step_ahead(&self, series: &[f64]) -> Result<Vec<f64>> {
        if !self.coefficients.exog.is_empty() {
            return Err(DiffusionError::InvalidConfig("model has regressors; none supplied".into()));
        }
        let s = self.config.season_length;
        let start = self.config.burn_in();
        let filt = Filter {
            ar: self.coefficients.ar_polynomial(s),
            ma: self.coefficients.ma_polynomial(s),
            exog: &[],
            columns: &[],
            start,
        };
        let a = filt.innovations(series);
        Ok((0..series.len()).map(|t| if t < start { 0.0 } else { series[t] - a[t] }).collect())
    }
}

/// Fits the same seasonal ARMA to both brands' per-period residuals.
pub fn fit_sarma_refinement(
    residuals: &PerBrand<Vec<f64>>,
    config: &SarmaConfig,
    horizon: usize,
) -> Result<PerBrand<SarmaFit>> {
    let (a, b) = rayon::join(
        || fit_sarma(&residuals.brand1, config, horizon),
        || fit_sarma(&residuals.brand2, config, horizon),
    );
    Ok(PerBrand::new(a?, b?))
}
