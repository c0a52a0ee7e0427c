//! Mean forecasts with delta-method confidence bands.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::PerBrand;
use crate::diffusion::CompetitionParams;
use crate::error::{DiffusionError, Result};
use crate::estimation::{predict_params, FitResult};
use crate::lm::central_jacobian;
use crate::sarma::SarmaFit;

const GRAD_REL_STEP: f64 = 1e-6;
// Must stay above the δ branch threshold so the δ column is not flat.
const GRAD_ABS_FLOOR: f64 = 1e-7;

/// Mean and, when the covariance is available, lower and upper band values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSeries {
    pub mean: Vec<f64>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

impl BandSeries {
    pub fn half_width(&self) -> Option<Vec<f64>> {
        Some(self.upper.as_ref()?.iter().zip(&self.mean).map(|(u, m)| u - m).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastBand {
    /// Future times `t_N + h * spacing`, `h = 1..=horizon`.
    pub t_grid: Vec<f64>,
    pub level: f64,
    /// False when the fit carried no covariance; only means are reported then.
    pub has_bands: bool,
    pub cumulative: PerBrand<BandSeries>,
    pub instantaneous: PerBrand<BandSeries>,
    /// Per-period mean plus the residual-model forecast, when a refinement was applied.
    pub refined_instantaneous: Option<PerBrand<Vec<f64>>>,
}

impl ForecastBand {
    /// Adds the residual forecasts of `refinement` to the per-period mean.
    pub fn with_refinement(mut self, refinement: &PerBrand<SarmaFit>) -> Result<Self> {
        let h = self.t_grid.len();
        let add = |mean: &[f64], fit: &SarmaFit| -> Result<Vec<f64>> {
            if fit.forecast.len() < h {
                return Err(DiffusionError::InvalidConfig(format!(
                    "residual forecast covers {} periods, need {h}",
                    fit.forecast.len()
                )));
            }
            Ok(mean.iter().zip(&fit.forecast).map(|(m, r)| m + r).collect())
        };
        self.refined_instantaneous = Some(PerBrand::new(
            add(&self.instantaneous.brand1.mean, &refinement.brand1)?,
            add(&self.instantaneous.brand2.mean, &refinement.brand2)?,
        ));
        Ok(self)
    }
}

/// Two-sided standard normal quantile for a central interval of mass `level`.
pub fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(DiffusionError::InvalidConfig(format!("level must lie in (0, 1), got {level}")));
    }
    Ok(Normal::standard().inverse_cdf(0.5 + 0.5 * level))
}

/// Forecasts `horizon` periods past the end of the fitted sample.
pub fn forecast_bands(result: &FitResult, horizon: usize, level: f64) -> Result<ForecastBand> {
    if horizon == 0 {
        return Err(DiffusionError::InvalidConfig("horizon must be at least 1".into()));
    }
    if !result.converged {
        return Err(DiffusionError::Rejected("the fit did not converge; refusing to forecast".into()));
    }
    let last = *result.t.last().ok_or_else(|| DiffusionError::InvalidData("empty fit".into()))?;
    let t_grid: Vec<f64> = (1..=horizon).map(|h| last + h as f64 * result.spacing).collect();
    bands_on_grid(&result.estimates, result.covariance_matrix().as_ref(), &t_grid, result.spacing, level)
}

/// Delta-method bands at arbitrary times for given estimates and covariance.
pub fn bands_on_grid(
    estimates: &CompetitionParams,
    covariance: Option<&DMatrix<f64>>,
    t_grid: &[f64],
    spacing: f64,
    level: f64,
) -> Result<ForecastBand> {
    let z = normal_quantile(level)?;
    let mean = predict_params(estimates, t_grid, spacing)?;
    let n = t_grid.len();
    let model = estimates.kind();

    let bands = match covariance {
        None => None,
        Some(cov) => {
            let k = model.n_params();
            if cov.nrows() != k || cov.ncols() != k {
                return Err(DiffusionError::InvalidConfig(format!("covariance must be {k}x{k}")));
            }
            // columns: d/dβ of [cum1, cum2, inst1, inst2] stacked over the grid
            let f = |x: &[f64]| {
                let p = CompetitionParams::from_slice(model, x).ok()?;
                let pr = predict_params(&p, t_grid, spacing).ok()?;
                let mut v = pr.cumulative.stacked();
                v.extend(pr.instantaneous.stacked());
                Some(v)
            };
            let grad = central_jacobian(&f, &estimates.to_vec(), GRAD_REL_STEP, GRAD_ABS_FLOOR)
                .ok_or_else(|| DiffusionError::Domain("band gradient left the model domain".into()))?;
            let sd: Vec<f64> = (0..4 * n)
                .map(|i| {
                    let g = DVector::from_iterator(k, grad.row(i).iter().copied());
                    (g.transpose() * cov * &g)[(0, 0)].max(0.0).sqrt()
                })
                .collect();
            Some(sd)
        }
    };

    let series = |m: &[f64], block: usize| -> BandSeries {
        match &bands {
            None => BandSeries { mean: m.to_vec(), lower: None, upper: None },
            Some(sd) => {
                let s = &sd[block * n..(block + 1) * n];
                BandSeries {
                    mean: m.to_vec(),
                    lower: Some(m.iter().zip(s).map(|(m, s)| m - z * s).collect()),
                    upper: Some(m.iter().zip(s).map(|(m, s)| m + z * s).collect()),
                }
            }
        }
    };

    Ok(ForecastBand {
        t_grid: t_grid.to_vec(),
        level,
        has_bands: bands.is_some(),
        cumulative: PerBrand::new(series(&mean.cumulative.brand1, 0), series(&mean.cumulative.brand2, 1)),
        instantaneous: PerBrand::new(
            series(&mean.instantaneous.brand1, 2),
            series(&mean.instantaneous.brand2, 3),
        ),
        refined_instantaneous: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::PotentialSpec;

    fn params() -> CompetitionParams {
        CompetitionParams {
            potential: PotentialSpec::GgSqrt { k: 1.0e5, p_c: 0.01, q_c: 0.08 },
            p1: 0.004,
            q1: 0.03,
            p2: 0.002,
            q2: 0.02,
            delta: -0.01,
        }
    }

    #[test]
    fn quantiles() {
        assert!((normal_quantile(0.95).unwrap() - 1.959963984540054).abs() < 1e-9);
        assert!(normal_quantile(1.0).is_err());
        assert!(normal_quantile(0.0).is_err());
    }

    #[test]
    fn zero_covariance_gives_zero_width() {
        let t: Vec<f64> = (61..=72).map(|i| i as f64).collect();
        let zero = DMatrix::zeros(8, 8);
        let b = bands_on_grid(&params(), Some(&zero), &t, 1.0, 0.95).unwrap();
        for s in [&b.cumulative.brand1, &b.instantaneous.brand2] {
            assert_eq!(s.lower.as_ref().unwrap(), &s.mean);
            assert_eq!(s.upper.as_ref().unwrap(), &s.mean);
        }
    }

    #[test]
    fn missing_covariance_flags_no_band() {
        let t = [61.0, 62.0];
        let b = bands_on_grid(&params(), None, &t, 1.0, 0.95).unwrap();
        assert!(!b.has_bands);
        assert!(b.cumulative.brand1.lower.is_none());
        assert_eq!(b.cumulative.brand1.mean.len(), 2);
    }

    #[test]
    fn symmetric_and_nested_in_level() {
        let t: Vec<f64> = (61..=72).map(|i| i as f64).collect();
        let cov = DMatrix::from_fn(8, 8, |i, j| if i == j { (1e-3 * (i + 1) as f64).powi(2) } else { 0.0 });
        let b95 = bands_on_grid(&params(), Some(&cov), &t, 1.0, 0.95).unwrap();
        let b99 = bands_on_grid(&params(), Some(&cov), &t, 1.0, 0.99).unwrap();
        for (a, b) in [(&b95.cumulative.brand1, &b99.cumulative.brand1), (&b95.instantaneous.brand2, &b99.instantaneous.brand2)] {
            let (lo, hi) = (a.lower.as_ref().unwrap(), a.upper.as_ref().unwrap());
            for i in 0..t.len() {
                assert!(((hi[i] - a.mean[i]) - (a.mean[i] - lo[i])).abs() <= 1e-9 * a.mean[i].abs().max(1.0));
                assert!(lo[i] <= a.mean[i] && a.mean[i] <= hi[i]);
                assert!(b.lower.as_ref().unwrap()[i] <= lo[i] && hi[i] <= b.upper.as_ref().unwrap()[i]);
            }
        }
    }
}
