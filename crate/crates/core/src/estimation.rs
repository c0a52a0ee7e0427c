//! Nonlinear least-squares estimation on stacked brand series.
//!
//! Both brands' observations are concatenated (brand 1 first) into one
//! response vector and the full parameter vector is fitted jointly.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{PerBrand, SalesSeries};
use crate::diffusion::{brand_trajectories, effective_coefficients, CompetitionParams, EffectiveCoefficients, ModelKind, PotentialSpec};
use crate::error::{DiffusionError, Result};
use crate::lm::{self, Bounds, LmConfig, Termination};

/// Normal quantile used for the reported 95% intervals.
pub const Z_95: f64 = 1.96;

/// Smallest value allowed for a strictly positive potential parameter.
const POSITIVE_FLOOR: f64 = 1e-12;

/// Reciprocal condition below which `JᵀJ` is treated as singular.
const RCOND: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitScale {
    /// Residuals on cumulative sales.
    Cumulative,
    /// Residuals on per-period sales, i.e. first differences of the closed form.
    Instantaneous,
}

impl std::str::FromStr for FitScale {
    type Err = DiffusionError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cumulative" => Ok(FitScale::Cumulative),
            "instantaneous" => Ok(FitScale::Instantaneous),
            other => Err(DiffusionError::InvalidConfig(format!("unknown fit scale '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub model: ModelKind,
    pub fit_scale: FitScale,
    /// Starting point; heuristic defaults are derived from the data when absent.
    pub initial_values: Option<CompetitionParams>,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Box for the parameter vector; defaults to positivity of the potential
    /// parameters with the brand coefficients left free.
    pub bounds: Option<Bounds>,
}

impl FitConfig {
    pub fn new(model: ModelKind) -> Self {
        Self {
            model,
            fit_scale: FitScale::Cumulative,
            initial_values: None,
            max_iterations: 500,
            tolerance: 1e-10,
            bounds: None,
        }
    }

    pub fn with_scale(mut self, scale: FitScale) -> Self {
        self.fit_scale = scale;
        self
    }

    pub fn with_initial(mut self, init: CompetitionParams) -> Self {
        self.initial_values = Some(init);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(DiffusionError::InvalidConfig(
                "tolerance must be positive and max_iterations at least 1".into(),
            ));
        }
        if let Some(init) = &self.initial_values {
            if init.kind() != self.model {
                return Err(DiffusionError::InvalidConfig(format!(
                    "initial values describe a {} potential but the model is {}",
                    init.kind(),
                    self.model
                )));
            }
            init.validate()?;
        }
        if let Some(b) = &self.bounds {
            let k = self.model.n_params();
            if b.lower.len() != k || b.upper.len() != k {
                return Err(DiffusionError::InvalidConfig(format!("bounds must have {k} entries")));
            }
        }
        Ok(())
    }
}

/// Starting values used when a [`FitConfig`] carries none.
pub fn default_initial_values(model: ModelKind, data: &SalesSeries) -> CompetitionParams {
    let ceiling = 1.5 * data.total_cumulative().max(1.0);
    let potential = match model {
        ModelKind::Constant => PotentialSpec::Constant { m: ceiling },
        ModelKind::Cdmp => PotentialSpec::GgSqrt { k: ceiling, p_c: 1e-3, q_c: 1e-2 },
        ModelKind::GgNoSqrt => PotentialSpec::GgNoSqrt { k: ceiling, p_c: 1e-3, q_c: 1e-2 },
        ModelKind::Gamma => {
            // mean shape/rate at half the observed span
            let span = data.t().last().copied().unwrap_or(1.0);
            PotentialSpec::GammaCdf { k: ceiling, rate: 4.0 / span, shape: 2.0 }
        }
    };
    CompetitionParams { potential, p1: 1e-3, q1: 1e-2, p2: 1e-4, q2: 1e-2, delta: 0.0 }
}

/// Potential parameters bounded below by a tiny positive floor, the rest free.
pub fn default_bounds(model: ModelKind) -> Bounds {
    let k = model.n_params();
    let np = model.potential_names().len();
    let mut b = Bounds::unbounded(k);
    b.lower[..np].fill(POSITIVE_FLOOR);
    b
}

/// Cumulative trajectories on `t_grid`; `None` outside the model domain.
pub fn model_cumulative(params: &CompetitionParams, t_grid: &[f64]) -> Option<PerBrand<Vec<f64>>> {
    let mut z1 = Vec::with_capacity(t_grid.len());
    let mut z2 = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let (a, b) = brand_trajectories(t, params).ok()?;
        if !(a.is_finite() && b.is_finite()) {
            return None;
        }
        z1.push(a);
        z2.push(b);
    }
    Some(PerBrand::new(z1, z2))
}

/// Per-period sales `z(t) - z(t - spacing)` on `t_grid`.
pub fn model_instantaneous(
    params: &CompetitionParams,
    t_grid: &[f64],
    spacing: f64,
) -> Option<PerBrand<Vec<f64>>> {
    let cum = model_cumulative(params, t_grid)?;
    let first = t_grid.first()? - spacing;
    let (b1, b2) = if first <= 0.0 { (0.0, 0.0) } else { brand_trajectories(first, params).ok()? };
    Some(PerBrand::new(differences(b1, &cum.brand1), differences(b2, &cum.brand2)))
}

fn differences(start: f64, cum: &[f64]) -> Vec<f64> {
    let mut prev = start;
    cum.iter()
        .map(|&c| {
            let d = c - prev;
            prev = c;
            d
        })
        .collect()
}

/// Fitted model with inference summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelKind,
    pub fit_scale: FitScale,
    pub param_names: Vec<String>,
    pub estimates: CompetitionParams,
    pub effective_coefficients: EffectiveCoefficients,
    /// `None` when `JᵀJ` is singular at the optimum.
    pub std_errors: Option<Vec<f64>>,
    pub conf_intervals_95: Option<Vec<(f64, f64)>>,
    pub covariance: Option<Vec<Vec<f64>>>,
    pub r_squared: f64,
    pub rho_squared: f64,
    /// Observed minus fitted on the fitting scale.
    pub residuals: PerBrand<Vec<f64>>,
    /// Observed minus fitted per-period sales, whatever the fitting scale.
    pub instantaneous_residuals: PerBrand<Vec<f64>>,
    pub t: Vec<f64>,
    pub spacing: f64,
    pub sse: f64,
    pub n_obs: usize,
    pub n_params: usize,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
}

impl FitResult {
    pub fn covariance_matrix(&self) -> Option<DMatrix<f64>> {
        let cov = self.covariance.as_ref()?;
        let k = cov.len();
        Some(DMatrix::from_fn(k, k, |i, j| cov[i][j]))
    }

    /// Residual variance `SSE / (n_obs - n_params)`.
    pub fn residual_variance(&self) -> f64 {
        self.sse / (self.n_obs - self.n_params) as f64
    }
}

/// Stacked residual vector `fitted - observed` for the given scale.
fn residual_fn<'a>(
    data: &'a SalesSeries,
    model: ModelKind,
    scale: FitScale,
) -> impl Fn(&[f64]) -> Option<Vec<f64>> + 'a {
    let observed = match scale {
        FitScale::Cumulative => data.cumulative().stacked(),
        FitScale::Instantaneous => data.sales().stacked(),
    };
    move |x: &[f64]| {
        let params = CompetitionParams::from_slice(model, x).ok()?;
        params.validate().ok()?;
        let fitted = match scale {
            FitScale::Cumulative => model_cumulative(&params, data.t())?,
            FitScale::Instantaneous => model_instantaneous(&params, data.t(), data.spacing())?,
        };
        Some(fitted.stacked().iter().zip(&observed).map(|(f, o)| f - o).collect())
    }
}

/// The residual closure used by [`fit`], exposed for derivative checks.
pub fn stacked_residuals(
    data: &SalesSeries,
    model: ModelKind,
    scale: FitScale,
) -> impl Fn(&[f64]) -> Option<Vec<f64>> + '_ {
    residual_fn(data, model, scale)
}

/// Potential time scales tried when no starting point is supplied, as
/// `(p_c, q_c)` for the Bass-type potentials.
const START_GRID: [(f64, f64); 5] = [(1e-3, 1e-2), (3e-3, 3e-2), (1e-2, 1e-1), (1e-3, 5e-2), (3e-2, 3e-1)];

/// Starting points tried by [`fit`] when the config carries none: the
/// heuristic defaults, then the constant-potential optimum combined with a
/// grid of potential time scales.
pub fn candidate_starts(model: ModelKind, data: &SalesSeries, config: &FitConfig) -> Vec<CompetitionParams> {
    let mut starts = vec![default_initial_values(model, data)];
    if model == ModelKind::Constant {
        return starts;
    }
    let constant_cfg = FitConfig {
        model: ModelKind::Constant,
        initial_values: None,
        bounds: None,
        ..config.clone()
    };
    let Ok(base) = fit_from(data, &constant_cfg, default_initial_values(ModelKind::Constant, data)) else {
        return starts;
    };
    let k = 1.2 * base.estimates.potential.ceiling();
    for (a, b) in START_GRID {
        let potential = match model {
            ModelKind::Cdmp => PotentialSpec::GgSqrt { k, p_c: a, q_c: b },
            ModelKind::GgNoSqrt => PotentialSpec::GgNoSqrt { k, p_c: a, q_c: b },
            ModelKind::Gamma => PotentialSpec::GammaCdf { k, rate: b, shape: 1.0 + 100.0 * a },
            ModelKind::Constant => unreachable!(),
        };
        let start = CompetitionParams { potential, ..base.estimates };
        if start.validate().is_ok() {
            starts.push(start);
        }
    }
    starts
}

/// Fits the competition model to `data`. Without initial values every
/// point of [`candidate_starts`] is tried and the lowest SSE is kept.
pub fn fit(data: &SalesSeries, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let k = config.model.n_params();
    let n = data.len();
    if 2 * n < k + 4 {
        return Err(DiffusionError::InvalidData(format!(
            "{n} periods are too few for {k} parameters"
        )));
    }
    if let Some(init) = config.initial_values {
        return fit_from(data, config, init);
    }
    let mut best: Option<FitResult> = None;
    let mut last_err = None;
    for start in candidate_starts(config.model, data, config) {
        match fit_from(data, config, start) {
            Ok(res) => {
                if best.as_ref().is_none_or(|b| res.sse < b.sse) {
                    best = Some(res);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| DiffusionError::InvalidConfig("no usable start".into())))
}

fn fit_from(data: &SalesSeries, config: &FitConfig, init: CompetitionParams) -> Result<FitResult> {
    let model = config.model;
    let k = model.n_params();
    let n = data.len();
    let bounds = config.bounds.clone().unwrap_or_else(|| default_bounds(model));
    let lm_cfg = LmConfig {
        max_iterations: config.max_iterations,
        tolerance: config.tolerance,
        ..LmConfig::default()
    };

    let f = residual_fn(data, model, config.fit_scale);
    let outcome = lm::minimize(&f, &init.to_vec(), Some(&bounds), &lm_cfg)?;
    let estimates = CompetitionParams::from_slice(model, &outcome.params)?;

    let n_obs = 2 * n;
    let s2 = outcome.sse / (n_obs - k) as f64;
    let covariance = lm::normal_inverse(&outcome.jacobian, RCOND).map(|inv| inv * s2);
    let std_errors = covariance
        .as_ref()
        .map(|c| (0..k).map(|i| c[(i, i)].max(0.0).sqrt()).collect::<Vec<_>>());
    let conf_intervals_95 = std_errors.as_ref().map(|se| {
        outcome.params.iter().zip(se).map(|(b, s)| (b - Z_95 * s, b + Z_95 * s)).collect()
    });

    let fitted_cum = model_cumulative(&estimates, data.t())
        .ok_or_else(|| DiffusionError::Domain("estimates left the model domain".into()))?;
    let fitted_inst = model_instantaneous(&estimates, data.t(), data.spacing())
        .ok_or_else(|| DiffusionError::Domain("estimates left the model domain".into()))?;
    let (r_squared, rho_squared) = goodness_of_fit(data, &fitted_cum)?;

    let minus = |obs: &[f64], fit: &[f64]| obs.iter().zip(fit).map(|(o, f)| o - f).collect::<Vec<_>>();
    let inst_res = PerBrand::new(
        minus(&data.sales().brand1, &fitted_inst.brand1),
        minus(&data.sales().brand2, &fitted_inst.brand2),
    );
    let residuals = match config.fit_scale {
        FitScale::Cumulative => PerBrand::new(
            minus(&data.cumulative().brand1, &fitted_cum.brand1),
            minus(&data.cumulative().brand2, &fitted_cum.brand2),
        ),
        FitScale::Instantaneous => inst_res.clone(),
    };

    Ok(FitResult {
        model,
        fit_scale: config.fit_scale,
        param_names: model.param_names().iter().map(|s| s.to_string()).collect(),
        estimates,
        effective_coefficients: effective_coefficients(&estimates),
        std_errors,
        conf_intervals_95,
        covariance: covariance.map(|c| (0..k).map(|i| (0..k).map(|j| c[(i, j)]).collect()).collect()),
        r_squared,
        rho_squared,
        residuals,
        instantaneous_residuals: inst_res,
        t: data.t().to_vec(),
        spacing: data.spacing(),
        sse: outcome.sse,
        n_obs,
        n_params: k,
        converged: outcome.converged(),
        termination: outcome.termination,
        iterations: outcome.iterations,
    })
}

/// Fitted curves on an arbitrary grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub t: Vec<f64>,
    pub cumulative: PerBrand<Vec<f64>>,
    pub instantaneous: PerBrand<Vec<f64>>,
}

/// Evaluates the fitted trajectories on `t_grid` (non-negative, increasing).
/// Per-period values are differences over the fit's period length.
pub fn predict(result: &FitResult, t_grid: &[f64]) -> Result<Prediction> {
    predict_params(&result.estimates, t_grid, result.spacing)
}

pub fn predict_params(params: &CompetitionParams, t_grid: &[f64], spacing: f64) -> Result<Prediction> {
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(DiffusionError::InvalidConfig("prediction grid must be increasing".into()));
    }
    params.validate()?;
    let mut cum = PerBrand::new(Vec::new(), Vec::new());
    let mut inst = PerBrand::new(Vec::new(), Vec::new());
    for &t in t_grid {
        let (z1, z2) = brand_trajectories(t, params)?;
        let back = t - spacing;
        let (b1, b2) = if back <= 0.0 { (0.0, 0.0) } else { brand_trajectories(back, params)? };
        cum.brand1.push(z1);
        cum.brand2.push(z2);
        inst.brand1.push(z1 - b1);
        inst.brand2.push(z2 - b2);
    }
    Ok(Prediction { t: t_grid.to_vec(), cumulative: cum, instantaneous: inst })
}

/// `R²` on the stacked cumulative series (centred, floored at zero) and
/// `ρ²`, the squared correlation of stacked per-period observed and fitted
/// sales. Fitted per-period values are differences of `fitted_cumulative`
/// starting from zero at launch.
pub fn goodness_of_fit(observed: &SalesSeries, fitted_cumulative: &PerBrand<Vec<f64>>) -> Result<(f64, f64)> {
    let n = observed.len();
    if fitted_cumulative.brand1.len() != n || fitted_cumulative.brand2.len() != n {
        return Err(DiffusionError::InvalidData(format!(
            "fitted series must have {n} points per brand"
        )));
    }
    let obs_cum = observed.cumulative().stacked();
    let fit_cum = fitted_cumulative.stacked();
    let mean = obs_cum.iter().sum::<f64>() / obs_cum.len() as f64;
    let sst: f64 = obs_cum.iter().map(|v| (v - mean).powi(2)).sum();
    if !(sst > 0.0) {
        return Err(DiffusionError::InvalidData("observed cumulative series has zero variance".into()));
    }
    let sse: f64 = obs_cum.iter().zip(&fit_cum).map(|(o, f)| (o - f).powi(2)).sum();
    let r_squared = (1.0 - sse / sst).clamp(0.0, 1.0);

    let obs_inst = observed.sales().stacked();
    let fit_inst = PerBrand::new(
        differences(0.0, &fitted_cumulative.brand1),
        differences(0.0, &fitted_cumulative.brand2),
    )
    .stacked();
    let rho_squared = squared_correlation(&obs_inst, &fit_inst)?;
    Ok((r_squared, rho_squared))
}

fn squared_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if !(saa > 0.0) {
        return Err(DiffusionError::InvalidData("observed per-period sales are constant".into()));
    }
    if !(sbb > 0.0) {
        return Ok(0.0);
    }
    Ok((sab * sab / (saa * sbb)).clamp(0.0, 1.0))
}
