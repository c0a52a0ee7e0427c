//! CSV and JSON artifact writers.

use std::path::Path;

use diffusia::estimation::{predict, FitResult};
use diffusia::report::{fmt_num, to_json};
use diffusia::{market_potential, ForecastBand, SalesSeries};
use serde::Serialize;

use crate::CliError;

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let text = to_json(value).map_err(|e| CliError::Io(e.to_string()))?;
    write_text(dir, name, &text)
}

fn csv_text(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv writes UTF-8"))
}

/// Observed and fitted per-period and cumulative sales for both brands.
pub fn fitted_curves(data: &SalesSeries, result: &FitResult) -> Result<String, CliError> {
    let pred = predict(result, data.t()).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut header = vec!["t".to_string()];
    for b in data.brand_names() {
        for col in ["observed", "fitted", "observed_cumulative", "fitted_cumulative"] {
            header.push(format!("{b}_{col}"));
        }
    }
    let rows = (0..data.len()).map(|i| {
        let mut r = vec![fmt_num(data.t()[i])];
        for (obs, cum, fit_i, fit_c) in [
            (&data.sales().brand1, &data.cumulative().brand1, &pred.instantaneous.brand1, &pred.cumulative.brand1),
            (&data.sales().brand2, &data.cumulative().brand2, &pred.instantaneous.brand2, &pred.cumulative.brand2),
        ] {
            r.extend([fmt_num(obs[i]), fmt_num(fit_i[i]), fmt_num(cum[i]), fmt_num(fit_c[i])]);
        }
        r
    });
    csv_text(&header, rows)
}

/// Estimated market potential on the sample grid.
pub fn potential_curve(result: &FitResult) -> Result<String, CliError> {
    let spec = result.estimates.potential;
    let mut rows = Vec::with_capacity(result.t.len());
    for &t in &result.t {
        let m = market_potential(t, &spec).map_err(|e| CliError::Validation(e.to_string()))?;
        rows.push(vec![fmt_num(t), fmt_num(m)]);
    }
    csv_text(&["t".to_string(), "m_hat".to_string()], rows.into_iter())
}

/// Per-period forecast with bands, the optional refined column, and the
/// cumulative forecast.
pub fn forecast_csv(brand_names: &[String; 2], band: &ForecastBand) -> Result<String, CliError> {
    let mut header = vec!["t".to_string()];
    for b in brand_names {
        for col in ["mean", "lower", "upper"] {
            header.push(format!("{b}_{col}"));
        }
        if band.refined_instantaneous.is_some() {
            header.push(format!("{b}_refined"));
        }
        for col in ["cumulative_mean", "cumulative_lower", "cumulative_upper"] {
            header.push(format!("{b}_{col}"));
        }
    }
    let at = |v: &Option<Vec<f64>>, i: usize| v.as_ref().map(|v| fmt_num(v[i])).unwrap_or_default();
    let rows = (0..band.t_grid.len()).map(|i| {
        let mut r = vec![fmt_num(band.t_grid[i])];
        let refined = band.refined_instantaneous.as_ref();
        for (k, (inst, cum)) in [
            (&band.instantaneous.brand1, &band.cumulative.brand1),
            (&band.instantaneous.brand2, &band.cumulative.brand2),
        ]
        .into_iter()
        .enumerate()
        {
            r.extend([fmt_num(inst.mean[i]), at(&inst.lower, i), at(&inst.upper, i)]);
            if let Some(rf) = refined {
                r.push(fmt_num(if k == 0 { rf.brand1[i] } else { rf.brand2[i] }));
            }
            r.extend([fmt_num(cum.mean[i]), at(&cum.lower, i), at(&cum.upper, i)]);
        }
        r
    });
    csv_text(&header, rows)
}
