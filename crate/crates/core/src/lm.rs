//! Box-constrained Levenberg–Marquardt with finite-difference Jacobians.
//!
//! The residual closure returns `None` for parameter vectors outside the
//! model's domain; such trial points are treated as rejected steps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{DiffusionError, Result};

const LAMBDA_MAX: f64 = 1e16;
const LAMBDA_MIN: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the SSE by less than this fraction.
    pub tolerance: f64,
    pub initial_lambda: f64,
    pub lambda_factor: f64,
    /// Relative forward-difference step.
    pub rel_step: f64,
    pub abs_step_floor: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-10,
            initial_lambda: 1e-3,
            lambda_factor: 10.0,
            rel_step: 1e-6,
            abs_step_floor: 1e-8,
        }
    }
}

/// Per-parameter box. Use infinities for free parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(n: usize) -> Self {
        Self { lower: vec![f64::NEG_INFINITY; n], upper: vec![f64::INFINITY; n] }
    }

    pub fn project(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.lower).zip(&self.upper).all(|((v, lo), hi)| v >= lo && v <= hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Relative SSE reduction fell below the tolerance.
    SseTolerance,
    /// The residuals are exactly zero.
    ExactFit,
    /// No damped step reduces the SSE any more.
    NoFurtherReduction,
    MaxIterations,
}

impl Termination {
    pub fn converged(self) -> bool {
        !matches!(self, Termination::MaxIterations)
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    pub sse: f64,
    /// Jacobian of the residuals at `params`.
    pub jacobian: DMatrix<f64>,
    pub iterations: usize,
    pub termination: Termination,
    /// SSE after every accepted step, starting with the initial value.
    pub sse_history: Vec<f64>,
}

impl LmOutcome {
    pub fn converged(&self) -> bool {
        self.termination.converged()
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn step_size(x: f64, rel: f64, floor: f64) -> f64 {
    (rel * x.abs()).max(floor)
}

/// Forward-difference Jacobian of `f` at `x`, where `r0 = f(x)`. Steps that
/// leave the box or the model domain are taken backwards instead.
pub fn forward_jacobian<F>(
    f: &F,
    x: &[f64],
    r0: &[f64],
    rel_step: f64,
    floor: f64,
    bounds: Option<&Bounds>,
) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let m = r0.len();
    let mut jac = DMatrix::zeros(m, x.len());
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let h = step_size(x[j], rel_step, floor);
        let fits_up = bounds.is_none_or(|b| x[j] + h <= b.upper[j]);
        let mut eval = |h: f64| {
            probe[j] = x[j] + h;
            let r = f(&probe);
            probe[j] = x[j];
            r.map(|r| (r, h))
        };
        let (r1, h) = if fits_up { eval(h).or_else(|| eval(-h)) } else { eval(-h) }?;
        for i in 0..m {
            jac[(i, j)] = (r1[i] - r0[i]) / h;
        }
    }
    Some(jac)
}

/// Central-difference Jacobian, used to cross-check the forward scheme.
pub fn central_jacobian<F>(f: &F, x: &[f64], rel_step: f64, floor: f64) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let mut probe = x.to_vec();
    let mut cols = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let h = step_size(x[j], rel_step, floor);
        probe[j] = x[j] + h;
        let up = f(&probe)?;
        probe[j] = x[j] - h;
        let down = f(&probe)?;
        probe[j] = x[j];
        cols.push(DVector::from_iterator(up.len(), up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * h))));
    }
    Some(DMatrix::from_columns(&cols))
}

/// Column scaling `D = sqrt(diag(JᵀJ))`, with 1 for empty columns.
fn column_scale(jtj: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        jtj.nrows(),
        (0..jtj.nrows()).map(|i| {
            let d = jtj[(i, i)].sqrt();
            if d > 0.0 && d.is_finite() {
                d
            } else {
                1.0
            }
        }),
    )
}

/// `(JᵀJ)⁻¹`, computed on the column-scaled matrix. Returns `None` when the
/// scaled matrix has reciprocal condition number below `rcond`.
pub fn normal_inverse(jac: &DMatrix<f64>, rcond: f64) -> Option<DMatrix<f64>> {
    let jtj = jac.transpose() * jac;
    let d = column_scale(&jtj);
    let n = jtj.nrows();
    let scaled = DMatrix::from_fn(n, n, |i, j| jtj[(i, j)] / (d[i] * d[j]));
    let svd = scaled.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin / smax < rcond {
        return None;
    }
    let inv = svd.pseudo_inverse(0.0).ok()?;
    let out = DMatrix::from_fn(n, n, |i, j| inv[(i, j)] / (d[i] * d[j]));
    Some((&out + out.transpose()) * 0.5)
}

/// Minimises `||f(x)||²` from `x0` inside `bounds`.
pub fn minimize<F>(f: F, x0: &[f64], bounds: Option<&Bounds>, cfg: &LmConfig) -> Result<LmOutcome>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    if cfg.max_iterations == 0 || !(cfg.tolerance > 0.0) {
        return Err(DiffusionError::InvalidConfig(
            "need max_iterations >= 1 and tolerance > 0".into(),
        ));
    }
    let mut x = x0.to_vec();
    if let Some(b) = bounds {
        if b.lower.len() != x.len() || b.upper.len() != x.len() {
            return Err(DiffusionError::InvalidConfig("bounds length mismatch".into()));
        }
        b.project(&mut x);
    }
    let mut r = f(&x).ok_or_else(|| {
        DiffusionError::InvalidConfig("initial values lie outside the model domain".into())
    })?;
    let mut sse = sum_sq(&r);
    if !sse.is_finite() {
        return Err(DiffusionError::InvalidConfig("initial residuals are not finite".into()));
    }
    let mut history = vec![sse];
    let mut lambda = cfg.initial_lambda;
    let mut iterations = 0;
    let n = x.len();

    let termination = 'outer: loop {
        if sse == 0.0 {
            break Termination::ExactFit;
        }
        if iterations >= cfg.max_iterations {
            break Termination::MaxIterations;
        }
        iterations += 1;

        let jac = forward_jacobian(&f, &x, &r, cfg.rel_step, cfg.abs_step_floor, bounds)
            .ok_or_else(|| DiffusionError::Domain("Jacobian evaluation left the model domain".into()))?;
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * DVector::from_column_slice(&r);
        let d = column_scale(&jtj);
        let scaled = DMatrix::from_fn(n, n, |i, j| jtj[(i, j)] / (d[i] * d[j]));
        let mut scaled_grad = grad.component_div(&d);
        // Parameters pinned at a bound by a gradient pointing outwards stay fixed.
        let active: Vec<bool> = (0..n)
            .map(|i| {
                bounds.is_some_and(|b| {
                    (x[i] <= b.lower[i] && grad[i] > 0.0) || (x[i] >= b.upper[i] && grad[i] < 0.0)
                })
            })
            .collect();
        for i in (0..n).filter(|&i| active[i]) {
            scaled_grad[i] = 0.0;
        }

        loop {
            let mut system = scaled.clone();
            for i in 0..n {
                if active[i] {
                    system.row_mut(i).fill(0.0);
                    system.column_mut(i).fill(0.0);
                    system[(i, i)] = 1.0;
                }
                system[(i, i)] += lambda;
            }
            let step = system.cholesky().map(|c| c.solve(&(-&scaled_grad)));
            if let Some(u) = step {
                let mut trial: Vec<f64> = (0..n).map(|i| x[i] + u[i] / d[i]).collect();
                if let Some(b) = bounds {
                    b.project(&mut trial);
                }
                let moved = trial.iter().zip(&x).any(|(a, b)| a != b);
                if moved {
                    if let Some(rt) = f(&trial) {
                        let sse_t = sum_sq(&rt);
                        if sse_t.is_finite() && sse_t < sse {
                            let rel_drop = (sse - sse_t) / sse;
                            x = trial;
                            r = rt;
                            sse = sse_t;
                            history.push(sse);
                            lambda = (lambda / cfg.lambda_factor).max(LAMBDA_MIN);
                            if rel_drop < cfg.tolerance {
                                break 'outer Termination::SseTolerance;
                            }
                            continue 'outer;
                        }
                    }
                }
            }
            lambda *= cfg.lambda_factor;
            if lambda > LAMBDA_MAX {
                break 'outer Termination::NoFurtherReduction;
            }
        }
    };

    let jacobian = forward_jacobian(&f, &x, &r, cfg.rel_step, cfg.abs_step_floor, bounds)
        .ok_or_else(|| DiffusionError::Domain("Jacobian evaluation left the model domain".into()))?;
    Ok(LmOutcome { params: x, residuals: r, sse, jacobian, iterations, termination, sse_history: history })
}
