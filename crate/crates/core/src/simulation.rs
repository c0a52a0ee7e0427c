//! Synthetic sales generation and Monte Carlo recovery studies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::SalesSeries;
use crate::diffusion::CompetitionParams;
use crate::error::{DiffusionError, Result};
use crate::estimation::{fit, model_instantaneous, FitConfig};
use crate::report::fmt_num;

/// Stated in every report: how noise enters the generated data.
pub const NOISE_MECHANISM: &str =
    "Gaussian noise added to per-period sales, truncated at zero, then cumulated";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    /// Constant sd: `noise_to_signal` times the RMS of the stacked per-period signal.
    AdditiveOnInstantaneous,
    /// Per-period sd: `noise_to_signal` times the absolute signal.
    MultiplicativeOnInstantaneous,
}

impl std::str::FromStr for NoiseModel {
    type Err = DiffusionError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "additive" | "additive-on-instantaneous" => Ok(NoiseModel::AdditiveOnInstantaneous),
            "multiplicative" | "multiplicative-on-instantaneous" => {
                Ok(NoiseModel::MultiplicativeOnInstantaneous)
            }
            other => Err(DiffusionError::InvalidConfig(format!("unknown noise model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub true_params: CompetitionParams,
    pub n_months: usize,
    pub noise_to_signal: f64,
    pub noise_model: NoiseModel,
    pub replications: usize,
    pub seed: u64,
    pub fitted_model: FitConfig,
}

impl SimScenario {
    /// Correctly specified scenario around [`reference_truth`].
    pub fn reference(noise_to_signal: f64, replications: usize, seed: u64) -> Self {
        let true_params = reference_truth();
        Self {
            true_params,
            n_months: 188,
            noise_to_signal,
            noise_model: NoiseModel::AdditiveOnInstantaneous,
            replications,
            seed,
            fitted_model: FitConfig::new(true_params.kind()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(DiffusionError::InvalidConfig("replications must be at least 1".into()));
        }
        if self.n_months < 24 {
            return Err(DiffusionError::InvalidConfig(format!(
                "need at least 24 months, got {}",
                self.n_months
            )));
        }
        if !(self.noise_to_signal >= 0.0 && self.noise_to_signal.is_finite()) {
            return Err(DiffusionError::InvalidConfig("noise_to_signal must be finite and >= 0".into()));
        }
        self.true_params.validate()
    }

    pub fn misspecified(&self) -> bool {
        self.fitted_model.model != self.true_params.kind()
    }
}

/// The case-study estimates with the sign of `p2` flipped so that both
/// brands' per-period sales stay positive from launch.
pub fn reference_truth() -> CompetitionParams {
    let cs = CompetitionParams::case_study();
    CompetitionParams { p2: cs.p2.abs(), ..cs }
}

fn signal(scenario: &SimScenario) -> Result<(Vec<f64>, Vec<f64>)> {
    let t: Vec<f64> = (1..=scenario.n_months).map(|i| i as f64).collect();
    let s = model_instantaneous(&scenario.true_params, &t, 1.0)
        .ok_or_else(|| DiffusionError::Domain("true parameters leave the model domain".into()))?;
    Ok((s.brand1, s.brand2))
}

/// Noise-free per-period sales of the scenario's true model.
pub fn true_signal(scenario: &SimScenario) -> Result<(Vec<f64>, Vec<f64>)> {
    scenario.validate()?;
    signal(scenario)
}

/// One synthetic data set. The RNG stream is selected by `replication`, so
/// the result does not depend on which other replications are drawn.
pub fn generate(scenario: &SimScenario, replication: u64) -> Result<SalesSeries> {
    scenario.validate()?;
    let (s1, s2) = signal(scenario)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(replication);

    let n2s = scenario.noise_to_signal;
    let rms = {
        let ss: f64 = s1.iter().chain(&s2).map(|v| v * v).sum();
        (ss / (2 * s1.len()) as f64).sqrt()
    };
    let mut draw = |s: &[f64]| -> Vec<f64> {
        s.iter()
            .map(|&v| {
                let sd = match scenario.noise_model {
                    NoiseModel::AdditiveOnInstantaneous => n2s * rms,
                    NoiseModel::MultiplicativeOnInstantaneous => n2s * v.abs(),
                };
                let e: f64 = StandardNormal.sample(&mut rng);
                (v + sd * e).max(0.0)
            })
            .collect()
    };
    let y1 = draw(&s1);
    let y2 = draw(&s2);
    SalesSeries::monthly(y1, y2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: u64,
    pub converged: bool,
    pub error: Option<String>,
    pub estimates: Option<Vec<f64>>,
    pub std_errors: Option<Vec<f64>>,
    /// Whether each compared parameter's 95% interval covers the truth.
    pub ci_hits: Option<Vec<bool>>,
    pub r_squared: Option<f64>,
    pub rho_squared: Option<f64>,
    pub sse: Option<f64>,
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub true_value: f64,
    pub mean_estimate: Option<f64>,
    pub bias: Option<f64>,
    /// `sqrt(mean((est - true)²)) / |true|`; absent when the truth is 0.
    pub relative_rmse: Option<f64>,
    /// Share of converged replications with a covariance whose 95% interval covers the truth.
    pub coverage: Option<f64>,
    pub n_intervals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub noise_mechanism: String,
    pub true_params: CompetitionParams,
    pub fitted_model: String,
    pub misspecified: bool,
    pub n_months: usize,
    pub noise_to_signal: f64,
    pub noise_model: NoiseModel,
    pub seed: u64,
    pub replications: usize,
    pub n_converged: usize,
    pub convergence_rate: f64,
    pub parameters: Vec<ParameterSummary>,
    pub records: Vec<ReplicationRecord>,
}

/// Indices `(in fitted vector, in true vector)` of the parameters both
/// families share: everything when correctly specified, else the brand block.
fn compared_parameters(scenario: &SimScenario) -> Vec<(usize, usize, String)> {
    let fitted = scenario.fitted_model.model;
    let truth = scenario.true_params.kind();
    let names = fitted.param_names();
    if fitted == truth {
        return names.iter().enumerate().map(|(i, n)| (i, i, n.to_string())).collect();
    }
    let (nf, nt) = (fitted.potential_names().len(), truth.potential_names().len());
    (0..5).map(|j| (nf + j, nt + j, names[nf + j].to_string())).collect()
}

fn replicate(scenario: &SimScenario, rep: u64, compared: &[(usize, usize, String)], truth: &[f64]) -> ReplicationRecord {
    let failed = |e: DiffusionError| ReplicationRecord {
        replication: rep,
        converged: false,
        error: Some(e.to_string()),
        estimates: None,
        std_errors: None,
        ci_hits: None,
        r_squared: None,
        rho_squared: None,
        sse: None,
        iterations: None,
    };
    let data = match generate(scenario, rep) {
        Ok(d) => d,
        Err(e) => return failed(e),
    };
    let res = match fit(&data, &scenario.fitted_model) {
        Ok(r) => r,
        Err(e) => return failed(e),
    };
    let ci_hits = res.conf_intervals_95.as_ref().map(|ci| {
        compared.iter().map(|(fi, ti, _)| ci[*fi].0 <= truth[*ti] && truth[*ti] <= ci[*fi].1).collect()
    });
    ReplicationRecord {
        replication: rep,
        converged: res.converged,
        error: None,
        estimates: Some(res.estimates.to_vec()),
        std_errors: res.std_errors.clone(),
        ci_hits,
        r_squared: Some(res.r_squared),
        rho_squared: Some(res.rho_squared),
        sse: Some(res.sse),
        iterations: Some(res.iterations),
    }
}

/// Generates, fits and summarises every replication. Replications run in
/// parallel; the report is identical to a serial run.
pub fn run_study(scenario: &SimScenario) -> Result<SimReport> {
    scenario.validate()?;
    let compared = compared_parameters(scenario);
    let truth = scenario.true_params.to_vec();
    let records: Vec<ReplicationRecord> = (0..scenario.replications as u64)
        .into_par_iter()
        .map(|rep| replicate(scenario, rep, &compared, &truth))
        .collect();

    let ok: Vec<&ReplicationRecord> = records.iter().filter(|r| r.converged).collect();
    let parameters = compared
        .iter()
        .enumerate()
        .map(|(c, (fi, ti, name))| {
            let tv = truth[*ti];
            let est: Vec<f64> = ok.iter().filter_map(|r| r.estimates.as_ref().map(|e| e[*fi])).collect();
            let n = est.len() as f64;
            let (mean_estimate, bias, relative_rmse) = if est.is_empty() {
                (None, None, None)
            } else {
                let mean = est.iter().sum::<f64>() / n;
                let mse = est.iter().map(|e| (e - tv).powi(2)).sum::<f64>() / n;
                let rel = (tv != 0.0).then(|| mse.sqrt() / tv.abs());
                (Some(mean), Some(mean - tv), rel)
            };
            let hits: Vec<bool> = ok.iter().filter_map(|r| r.ci_hits.as_ref().map(|h| h[c])).collect();
            let coverage =
                (!hits.is_empty()).then(|| hits.iter().filter(|h| **h).count() as f64 / hits.len() as f64);
            ParameterSummary {
                name: name.clone(),
                true_value: tv,
                mean_estimate,
                bias,
                relative_rmse,
                coverage,
                n_intervals: hits.len(),
            }
        })
        .collect();

    Ok(SimReport {
        noise_mechanism: NOISE_MECHANISM.to_string(),
        true_params: scenario.true_params,
        fitted_model: scenario.fitted_model.model.to_string(),
        misspecified: scenario.misspecified(),
        n_months: scenario.n_months,
        noise_to_signal: scenario.noise_to_signal,
        noise_model: scenario.noise_model,
        seed: scenario.seed,
        replications: scenario.replications,
        n_converged: ok.len(),
        convergence_rate: ok.len() as f64 / records.len() as f64,
        parameters,
        records,
    })
}

impl SimReport {
    pub fn summary(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// Mean relative RMSE over the parameters that have one.
    pub fn average_relative_rmse(&self) -> Option<f64> {
        let v: Vec<f64> = self.parameters.iter().filter_map(|p| p.relative_rmse).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// One row per replication: status, fit statistics and every estimate.
    pub fn records_csv(&self) -> String {
        let names = self
            .fitted_model
            .parse::<crate::diffusion::ModelKind>()
            .map(|m| m.param_names())
            .unwrap_or_default();
        let mut out = String::from("replication,converged,r_squared,rho_squared,sse,iterations");
        for n in &names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}",
                r.replication,
                r.converged,
                opt(r.r_squared),
                opt(r.rho_squared),
                opt(r.sse),
                r.iterations.map(|i| i.to_string()).unwrap_or_default()
            ));
            for j in 0..names.len() {
                out.push(',');
                out.push_str(&opt(r.estimates.as_ref().map(|e| e[j])));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::ModelKind;

    fn small(n2s: f64) -> SimScenario {
        SimScenario { n_months: 60, ..SimScenario::reference(n2s, 3, 7) }
    }

    #[test]
    fn noiseless_generation_is_the_signal() {
        let sc = small(0.0);
        let d = generate(&sc, 0).unwrap();
        let (s1, s2) = true_signal(&sc).unwrap();
        assert_eq!(d.sales().brand1, s1);
        assert_eq!(d.sales().brand2, s2);
    }

    #[test]
    fn deterministic_per_replication() {
        let sc = small(0.05);
        assert_eq!(generate(&sc, 4).unwrap(), generate(&sc, 4).unwrap());
        assert_ne!(generate(&sc, 4).unwrap(), generate(&sc, 5).unwrap());
        let other = SimScenario { seed: 8, ..sc.clone() };
        assert_ne!(generate(&sc, 4).unwrap(), generate(&other, 4).unwrap());
    }

    #[test]
    fn scenario_validation() {
        assert!(SimScenario { replications: 0, ..small(0.0) }.validate().is_err());
        assert!(SimScenario { n_months: 23, ..small(0.0) }.validate().is_err());
        assert!(small(-0.1).validate().is_err());
        assert!(small(f64::NAN).validate().is_err());
    }

    #[test]
    fn misspecified_compares_brand_block() {
        let sc = SimScenario { fitted_model: FitConfig::new(ModelKind::Constant), ..small(0.0) };
        assert!(sc.misspecified());
        let c = compared_parameters(&sc);
        assert_eq!(c.len(), 5);
        assert_eq!(c[0], (1, 3, "p1".to_string()));
        assert_eq!(compared_parameters(&small(0.0)).len(), 8);
    }

    #[test]
    fn noise_model_names() {
        assert_eq!("additive".parse::<NoiseModel>().unwrap(), NoiseModel::AdditiveOnInstantaneous);
        assert!("bogus".parse::<NoiseModel>().is_err());
    }
}
