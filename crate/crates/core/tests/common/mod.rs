#![allow(dead_code)]

use diffusia::estimation::model_instantaneous;
use diffusia::{CompetitionParams, PotentialSpec, SalesSeries};
use rand::Rng;

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// A parameter vector inside the region where both brands behave like
/// products: positive innovation, non-negative imitation, `|delta| <= q_s`.
pub fn random_params<R: Rng>(rng: &mut R) -> CompetitionParams {
    let k = log_uniform(rng, 1e3, 1e8);
    let potential = match rng.random_range(0..4) {
        0 => PotentialSpec::Constant { m: k },
        1 => PotentialSpec::GgSqrt { k, p_c: log_uniform(rng, 1e-4, 5e-2), q_c: rng.random_range(0.0..0.5) },
        2 => PotentialSpec::GgNoSqrt { k, p_c: log_uniform(rng, 1e-4, 5e-2), q_c: rng.random_range(0.0..0.5) },
        _ => PotentialSpec::GammaCdf { k, rate: log_uniform(rng, 0.01, 0.5), shape: rng.random_range(1.0..5.0) },
    };
    let p1 = log_uniform(rng, 1e-4, 3e-2);
    let p2 = log_uniform(rng, 1e-4, 3e-2);
    let q1 = rng.random_range(0.0..0.3);
    let q2 = rng.random_range(0.0..0.3);
    let delta = (q1 + q2) * rng.random_range(-1.0..1.0);
    CompetitionParams { potential, p1, q1, p2, q2, delta }
}

/// Noise-free monthly sales of `params` for `n` months.
pub fn noiseless(params: &CompetitionParams, n: usize) -> SalesSeries {
    let t: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    let s = model_instantaneous(params, &t, 1.0).expect("valid parameters");
    SalesSeries::monthly(s.brand1, s.brand2).expect("non-negative sales")
}
