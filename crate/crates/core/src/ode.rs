//! Fixed-step RK4 integration of the diffusion differential systems.
//!
//! These integrators never touch the closed forms except to seed an initial
//! state, so they serve as an independent check on `diffusion`.

use serde::{Deserialize, Serialize};

use crate::diffusion::{
    bass_w, brand_trajectories, competition_rhs, market_potential, market_potential_derivative,
    CompetitionParams, PotentialSpec,
};
use crate::error::{DiffusionError, Result};

/// Relative slack allowed on the `[0, m(t)]` envelope of the category total.
const ENVELOPE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub t_start: f64,
    pub t_end: f64,
    pub step: f64,
    /// `(z1, z2)` at `t_start`. The univariate integrator starts from their sum.
    pub initial_state: (f64, f64),
}

impl IntegrationConfig {
    /// Config whose initial state is taken from the closed form at `t_start`.
    pub fn seeded(params: &CompetitionParams, t_start: f64, t_end: f64, step: f64) -> Result<Self> {
        let initial_state = brand_trajectories(t_start, params)?;
        let cfg = Self { t_start, t_end, step, initial_state };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { t_start, t_end, step, initial_state } = *self;
        if !(t_start >= 0.0 && t_end > t_start && t_end.is_finite()) {
            return Err(DiffusionError::InvalidConfig(format!(
                "need 0 <= t_start < t_end, got [{t_start}, {t_end}]"
            )));
        }
        if !(step > 0.0 && step <= t_end - t_start) {
            return Err(DiffusionError::InvalidConfig(format!(
                "step must lie in (0, t_end - t_start], got {step}"
            )));
        }
        if !(initial_state.0.is_finite() && initial_state.1.is_finite()) {
            return Err(DiffusionError::InvalidConfig("initial state must be finite".into()));
        }
        Ok(())
    }

    fn grid(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let span = self.t_end - self.t_start;
        let n = ((span / self.step) - 1e-9).ceil().max(1.0) as usize;
        (0..n).map(move |i| {
            let t = self.t_start + i as f64 * self.step;
            let next = if i + 1 == n { self.t_end } else { self.t_start + (i + 1) as f64 * self.step };
            (t, next - t)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub z1: f64,
    pub z2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnivariatePoint {
    pub t: f64,
    pub z: f64,
}

/// One classical Runge–Kutta step.
pub fn rk4_step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], h: f64) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]> + ?Sized,
{
    let axpy = |a: &[f64; N], s: f64, b: &[f64; N]| -> [f64; N] {
        let mut out = *a;
        for (o, bi) in out.iter_mut().zip(b) {
            *o += s * bi;
        }
        out
    };
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k1))?;
    let k3 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k2))?;
    let k4 = f(t + h, &axpy(y, h, &k3))?;
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

fn potential_at(t: f64, spec: &PotentialSpec) -> Result<(f64, f64)> {
    let m = market_potential(t, spec)?;
    if !(m > 0.0) {
        return Err(DiffusionError::Integration {
            t,
            reason: "market potential is zero; start the integration at t > 0".into(),
        });
    }
    let dm = market_potential_derivative(t, spec).map_err(|e| DiffusionError::Integration {
        t,
        reason: e.to_string(),
    })?;
    Ok((m, dm))
}

fn check_envelope(t: f64, total: f64, spec: &PotentialSpec) -> Result<()> {
    let m = market_potential(t, spec)?;
    if !total.is_finite() || total < -ENVELOPE_TOL * m || total > m * (1.0 + ENVELOPE_TOL) {
        return Err(DiffusionError::Integration {
            t,
            reason: format!("category total {total} left the envelope [0, {m}]"),
        });
    }
    Ok(())
}

/// Integrates the two-brand system with fixed-step RK4.
pub fn integrate_competition(
    params: &CompetitionParams,
    config: &IntegrationConfig,
) -> Result<Vec<TrajectoryPoint>> {
    params.validate()?;
    config.validate()?;
    let spec = params.potential;
    let mut rhs = |t: f64, z: &[f64; 2]| -> Result<[f64; 2]> {
        let (m, dm) = potential_at(t, &spec)?;
        let (r1, r2) = competition_rhs(params, m, dm, z[0] / m, z[1] / m);
        Ok([r1, r2])
    };

    let (z1, z2) = config.initial_state;
    check_envelope(config.t_start, z1 + z2, &spec)?;
    let mut out = Vec::with_capacity(((config.t_end - config.t_start) / config.step) as usize + 2);
    out.push(TrajectoryPoint { t: config.t_start, z1, z2 });
    let mut state = [z1, z2];
    for (t, h) in config.grid() {
        state = rk4_step(&mut rhs, t, &state, h)?;
        check_envelope(t + h, state[0] + state[1], &spec)?;
        out.push(TrajectoryPoint { t: t + h, z1: state[0], z2: state[1] });
    }
    Ok(out)
}

/// Integrates the single-equation dynamic-potential model
/// `z' = m (p_s + q_s z/m)(1 - z/m) + z m'/m`.
pub fn integrate_univariate(
    potential: &PotentialSpec,
    p_s: f64,
    q_s: f64,
    config: &IntegrationConfig,
) -> Result<Vec<UnivariatePoint>> {
    potential.validate()?;
    config.validate()?;
    // same domain as the Bass fraction
    bass_w(0.0, p_s, q_s)?;
    let mut rhs = |t: f64, z: &[f64; 1]| -> Result<[f64; 1]> {
        let (m, dm) = potential_at(t, potential)?;
        let u = z[0] / m;
        Ok([m * (p_s + q_s * u) * (1.0 - u) + z[0] * dm / m])
    };

    let z0 = config.initial_state.0 + config.initial_state.1;
    check_envelope(config.t_start, z0, potential)?;
    let mut out = vec![UnivariatePoint { t: config.t_start, z: z0 }];
    let mut state = [z0];
    for (t, h) in config.grid() {
        state = rk4_step(&mut rhs, t, &state, h)?;
        check_envelope(t + h, state[0], potential)?;
        out.push(UnivariatePoint { t: t + h, z: state[0] });
    }
    Ok(out)
}

/// Largest disagreement between the closed form and RK4 over one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleDeviation {
    pub max_abs: f64,
    /// `|rk4 - closed| / |closed|` over points where the closed form is nonzero.
    pub max_rel: f64,
    pub t_at_max_rel: f64,
    pub n_points: usize,
}

/// Integrates from the closed-form state at `t_start` and compares both
/// brands with the closed form at every step.
pub fn oracle_deviation(
    params: &CompetitionParams,
    t_start: f64,
    t_end: f64,
    step: f64,
) -> Result<OracleDeviation> {
    let cfg = IntegrationConfig::seeded(params, t_start, t_end, step)?;
    let path = integrate_competition(params, &cfg)?;
    let mut out = OracleDeviation { max_abs: 0.0, max_rel: 0.0, t_at_max_rel: t_start, n_points: path.len() };
    for pt in &path {
        let (c1, c2) = brand_trajectories(pt.t, params)?;
        for (ode, closed) in [(pt.z1, c1), (pt.z2, c2)] {
            let abs = (ode - closed).abs();
            out.max_abs = out.max_abs.max(abs);
            if closed != 0.0 && abs / closed.abs() > out.max_rel {
                out.max_rel = abs / closed.abs();
                out.t_at_max_rel = pt.t;
            }
        }
    }
    Ok(out)
}
