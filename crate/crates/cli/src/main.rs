use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use diffusia::estimation::{default_initial_values, FitScale};
use diffusia::ode::oracle_deviation;
use diffusia::sarma::SarmaConfig;
use diffusia::selection::default_potential_specs;
use diffusia::simulation::{reference_truth, NoiseModel, SimScenario};
use diffusia::{
    compare_potentials, fit, fit_sarma_refinement, forecast_bands, run_study, CompetitionParams,
    FitConfig, FitResult, ModelKind, PotentialSpec, SalesSeries,
};
use serde::Serialize;

mod ingest;
mod output;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("I/O error: {0}")]
    Io(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("oracle check failed: {0}")]
    Oracle(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 3,
            CliError::Validation(_) => 4,
            CliError::Convergence(_) => 5,
            CliError::Oracle(_) => 6,
        }
    }
}

impl From<diffusia::DiffusionError> for CliError {
    fn from(e: diffusia::DiffusionError) -> Self {
        CliError::Validation(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "diffusia", version, about = "Two-brand diffusion with a dynamic market potential")]
struct Cli {
    /// Directory for the output artifacts (created if missing).
    #[arg(short, long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct FitOpts {
    /// Market potential: cdmp, constant, gg-nosqrt or gamma.
    #[arg(long, default_value = "cdmp")]
    model: ModelKind,
    /// Residual scale: cumulative or instantaneous.
    #[arg(long, default_value = "cumulative")]
    scale: FitScale,
    /// Starting values as name=value, e.g. K=5e7 q_c=0.05.
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
    init: Vec<String>,
    /// Relative SSE reduction that stops the optimiser.
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model and write fit_report.json, fitted_curves.csv, potential_curve.csv.
    Fit {
        input: PathBuf,
        #[command(flatten)]
        opts: FitOpts,
    },
    /// Fit all four potentials and write comparison.json.
    Compare {
        input: PathBuf,
        #[arg(long, default_value = "cumulative")]
        scale: FitScale,
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
    },
    /// Fit, then write forecast_bands.csv for the next months.
    Forecast {
        input: PathBuf,
        #[command(flatten)]
        opts: FitOpts,
        #[arg(long, default_value_t = 12)]
        horizon: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Seasonal ARMA orders P,Q,SP,SQ for a residual refinement column.
        #[arg(long, value_name = "P,Q,SP,SQ")]
        sarma: Option<String>,
    },
    /// Monte Carlo recovery study on synthetic data; writes sim_report.json
    /// and sim_replications.csv. Here --init overrides the true parameters.
    Simulate {
        #[command(flatten)]
        opts: FitOpts,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        replications: usize,
        /// Noise-to-signal ratio.
        #[arg(long, default_value_t = 0.02)]
        noise: f64,
        #[arg(long, default_value = "additive")]
        noise_model: NoiseModel,
        #[arg(long, default_value_t = 188)]
        months: usize,
        /// Start every fit at the true parameters instead of the data-driven starts.
        #[arg(long)]
        start_at_truth: bool,
    },
    /// Compare closed-form trajectories with RK4 integration.
    OracleCheck {
        #[arg(long, default_value = "cdmp")]
        model: ModelKind,
        /// Parameter overrides as name=value; defaults are the case-study estimates.
        #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
        init: Vec<String>,
        #[arg(long, default_value_t = 0.5)]
        t_start: f64,
        #[arg(long, default_value_t = 188.0)]
        t_end: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Largest acceptable relative deviation.
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
}

/// Applies `name=value` overrides to a parameter vector.
fn apply_overrides(base: CompetitionParams, pairs: &[String]) -> Result<CompetitionParams, CliError> {
    let kind = base.kind();
    let names = kind.param_names();
    let mut v = base.to_vec();
    for pair in pairs {
        let (k, val) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("--init expects name=value, got '{pair}'")))?;
        let idx = names.iter().position(|n| *n == k).ok_or_else(|| {
            CliError::Validation(format!("unknown parameter '{k}' for {kind}; expected one of {}", names.join(", ")))
        })?;
        v[idx] = val
            .parse()
            .map_err(|_| CliError::Validation(format!("--init {k}: '{val}' is not a number")))?;
    }
    Ok(CompetitionParams::from_slice(kind, &v)?)
}

fn fit_config(opts: &FitOpts, data: &SalesSeries) -> Result<FitConfig, CliError> {
    let mut cfg = FitConfig::new(opts.model).with_scale(opts.scale);
    cfg.tolerance = opts.tolerance;
    cfg.max_iterations = opts.max_iter;
    if !opts.init.is_empty() {
        let base = default_initial_values(opts.model, data);
        cfg.initial_values = Some(apply_overrides(base, &opts.init)?);
    }
    Ok(cfg)
}

fn parse_sarma(spec: &str) -> Result<SarmaConfig, CliError> {
    let parts: Vec<usize> = spec
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Validation(format!("--sarma expects P,Q,SP,SQ, got '{spec}'")))?;
    let [p, q, sp, sq] = parts[..] else {
        return Err(CliError::Validation(format!("--sarma expects four orders, got '{spec}'")));
    };
    Ok(SarmaConfig { ar_order: p, ma_order: q, seasonal_ar_order: sp, seasonal_ma_order: sq, ..SarmaConfig::default() })
}

#[derive(Serialize)]
struct FitReport<'a> {
    brand_names: &'a [String; 2],
    n_periods: usize,
    #[serde(flatten)]
    result: &'a FitResult,
}

#[derive(Serialize)]
struct OracleReport {
    model: ModelKind,
    params: CompetitionParams,
    t_start: f64,
    t_end: f64,
    step: f64,
    tolerance: f64,
    max_abs_deviation: f64,
    max_rel_deviation: f64,
    t_at_max_rel: f64,
    n_points: usize,
    passed: bool,
}

fn require_converged(res: &FitResult) -> Result<(), CliError> {
    if res.converged {
        Ok(())
    } else {
        Err(CliError::Convergence(format!(
            "{} fit stopped after {} iterations without meeting the tolerance",
            res.model, res.iterations
        )))
    }
}

fn oracle_base(model: ModelKind) -> CompetitionParams {
    let cs = CompetitionParams::case_study();
    let PotentialSpec::GgSqrt { k, p_c, q_c } = cs.potential else { unreachable!() };
    let potential = match model {
        ModelKind::Cdmp => cs.potential,
        ModelKind::Constant => PotentialSpec::Constant { m: k },
        ModelKind::GgNoSqrt => PotentialSpec::GgNoSqrt { k, p_c, q_c },
        ModelKind::Gamma => PotentialSpec::GammaCdf { k, rate: 0.05, shape: 2.0 },
    };
    CompetitionParams { potential, ..cs }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let out: &Path = &cli.out;
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("cannot create {}: {e}", out.display())))?;
    match cli.command {
        Command::Fit { input, opts } => {
            let data = ingest::ingest(&input)?;
            let res = fit(&data, &fit_config(&opts, &data)?)?;
            output::write_json(out, "fit_report.json", &FitReport {
                brand_names: data.brand_names(),
                n_periods: data.len(),
                result: &res,
            })?;
            output::write_text(out, "fitted_curves.csv", &output::fitted_curves(&data, &res)?)?;
            output::write_text(out, "potential_curve.csv", &output::potential_curve(&res)?)?;
            println!("{}: R2 {:.6} rho2 {:.6} converged {}", res.model, res.r_squared, res.rho_squared, res.converged);
            require_converged(&res)
        }
        Command::Compare { input, scale, tolerance, max_iter } => {
            let data = ingest::ingest(&input)?;
            let specs: Vec<FitConfig> = default_potential_specs()
                .into_iter()
                .map(|c| FitConfig { tolerance, max_iterations: max_iter, ..c.with_scale(scale) })
                .collect();
            let table = compare_potentials(&data, &specs);
            output::write_json(out, "comparison.json", &table)?;
            for r in &table.rows {
                println!("{:<10} R2 {:?} rho2 {:?}", r.model.to_string(), r.r_squared, r.rho_squared);
            }
            Ok(())
        }
        Command::Forecast { input, opts, horizon, level, sarma } => {
            let data = ingest::ingest(&input)?;
            let res = fit(&data, &fit_config(&opts, &data)?)?;
            require_converged(&res)?;
            let mut band = forecast_bands(&res, horizon, level)?;
            if let Some(spec) = sarma {
                let cfg = parse_sarma(&spec)?;
                let refinement = fit_sarma_refinement(&res.instantaneous_residuals, &cfg, horizon)?;
                band = band.with_refinement(&refinement)?;
            }
            if !band.has_bands {
                eprintln!("warning: parameter covariance unavailable; writing mean forecasts only");
            }
            output::write_text(out, "forecast_bands.csv", &output::forecast_csv(data.brand_names(), &band)?)
        }
        Command::Simulate { opts, seed, replications, noise, noise_model, months, start_at_truth } => {
            // --init here alters the data-generating parameters
            let truth = apply_overrides(reference_truth(), &opts.init)?;
            let mut fitted = FitConfig::new(opts.model).with_scale(opts.scale);
            fitted.tolerance = opts.tolerance;
            fitted.max_iterations = opts.max_iter;
            if start_at_truth {
                if opts.model != truth.kind() {
                    return Err(CliError::Validation("--start-at-truth needs the cdmp model".into()));
                }
                fitted.initial_values = Some(truth);
            }
            let scenario = SimScenario {
                true_params: truth,
                n_months: months,
                noise_to_signal: noise,
                noise_model,
                replications,
                seed,
                fitted_model: fitted,
            };
            let report = run_study(&scenario)?;
            output::write_json(out, "sim_report.json", &report)?;
            output::write_text(out, "sim_replications.csv", &report.records_csv())?;
            println!("converged {}/{}", report.n_converged, report.replications);
            for p in &report.parameters {
                println!("{:<6} rel RMSE {:?} coverage {:?}", p.name, p.relative_rmse, p.coverage);
            }
            Ok(())
        }
        Command::OracleCheck { model, init, t_start, t_end, step, tolerance } => {
            let params = apply_overrides(oracle_base(model), &init)?;
            let dev = oracle_deviation(&params, t_start, t_end, step)?;
            let passed = dev.max_rel < tolerance;
            output::write_json(out, "oracle_check.json", &OracleReport {
                model,
                params,
                t_start,
                t_end,
                step,
                tolerance,
                max_abs_deviation: dev.max_abs,
                max_rel_deviation: dev.max_rel,
                t_at_max_rel: dev.t_at_max_rel,
                n_points: dev.n_points,
                passed,
            })?;
            println!("max relative deviation {:.3e} at t = {}", dev.max_rel, dev.t_at_max_rel);
            if passed {
                Ok(())
            } else {
                Err(CliError::Oracle(format!("deviation {:.3e} exceeds {tolerance:e}", dev.max_rel)))
            }
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("DIFFUSIA_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n >= 1)
            .ok_or_else(|| CliError::Validation(format!("DIFFUSIA_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
