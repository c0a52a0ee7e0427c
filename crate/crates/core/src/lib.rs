//! Two-brand innovation diffusion with a shared, time-evolving market
//! potential.
//!
//! The crate evaluates the closed-form brand trajectories, certifies them
//! against RK4 integration of the underlying differential system, fits the
//! model to monthly sales by nonlinear least squares, compares alternative
//! potentials, forecasts with delta-method bands and a seasonal ARMA residual
//! stage, and runs Monte Carlo recovery studies.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod data;
pub mod diffusion;
pub mod error;
pub mod estimation;
pub mod forecast;
pub mod lm;
pub mod ode;
pub mod report;
pub mod sarma;
pub mod selection;
pub mod simulation;
pub mod special;

pub use diffusion::{
    aux_y, bass_cumulative, bass_w, brand_trajectories, effective_coefficients, instantaneous_rates,
    market_potential, market_potential_derivative, power_ratio, BassParams, CompetitionParams,
    EffectiveCoefficients, ModelKind, PotentialSpec,
};
pub use data::{PerBrand, SalesSeries};
pub use error::{DiffusionError, Result};
pub use estimation::{fit, goodness_of_fit, predict, FitConfig, FitResult, FitScale};
pub use forecast::{forecast_bands, ForecastBand};
pub use sarma::{fit_sarma_refinement, SarmaConfig, SarmaFit};
pub use selection::{compare_potentials, f_ratio, partial_r2, ComparisonTable, ModelComparison};
pub use simulation::{generate, run_study, NoiseModel, SimReport, SimScenario};
