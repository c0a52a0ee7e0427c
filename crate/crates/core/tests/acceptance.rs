//! Acceptance checks. Runs as a plain binary so that every criterion prints
//! one PASS/FAIL line; the process fails if any criterion fails.

mod common;

use std::time::Instant;

use diffusia::ode::{integrate_competition, oracle_deviation, IntegrationConfig};
use diffusia::sarma::{fit_sarma, SarmaConfig};
use diffusia::selection::default_potential_specs;
use diffusia::simulation::{generate, reference_truth, SimScenario};
use diffusia::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Check = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let dev = oracle_deviation(&CompetitionParams::case_study(), 0.5, 188.0, 0.01).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        dev.max_rel < 1e-6 && secs < 1.0,
        format!("max rel error {:.2e} at t = {:.2} over {} points, {secs:.3} s", dev.max_rel, dev.t_at_max_rel, dev.n_points),
    )
}

fn sum_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = common::random_params(&mut rng);
        for _ in 0..50 {
            let t = rng.random_range(0.01..200.0);
            let (z1, z2) = brand_trajectories(t, &p).unwrap();
            let target = market_potential(t, &p.potential).unwrap() * bass_w(t, p.p_s(), p.q_s()).unwrap();
            worst = worst.max(rel(z1 + z2, target));
        }
    }
    outcome(worst < 1e-12, format!("worst relative error {worst:.2e} over 50000 evaluations"))
}

fn branch_continuity() -> Outcome {
    // the pair (z1, z2) is compared as a vector; the per-component gap and the
    // gap left after removing the first-order change in delta are shown too
    let base = CompetitionParams::case_study();
    let q_s = base.q_s();
    let at = |t: f64, delta: f64| brand_trajectories(t, &CompetitionParams { delta, ..base }).unwrap();
    let (mut worst, mut worst_component, mut worst_second_order): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..=375 {
        let t = 0.5 + 0.5 * i as f64;
        for branch in [0.0, q_s] {
            let b = at(t, branch);
            let norm = b.0.hypot(b.1);
            let (up, down) = (at(t, branch + 1e-8), at(t, branch - 1e-8));
            for g in [up, down] {
                worst = worst.max((g.0 - b.0).hypot(g.1 - b.1) / norm);
                worst_component = worst_component.max(rel(g.0, b.0)).max(rel(g.1, b.1));
            }
            let mid = (0.5 * (up.0 + down.0), 0.5 * (up.1 + down.1));
            worst_second_order = worst_second_order.max((mid.0 - b.0).hypot(mid.1 - b.1) / norm);
        }
    }
    outcome(
        worst < 1e-6,
        format!(
            "worst relative gap {worst:.2e} over t in [0.5, 188]; per component {worst_component:.2e}; \
             after the first-order term {worst_second_order:.2e}"
        ),
    )
}

fn effective_coefficient_arithmetic() -> Outcome {
    let e = effective_coefficients(&CompetitionParams::case_study());
    let a = format!("{:.4}", e.brand1.within_brand);
    let b = format!("{:.4}", e.brand2.cross_brand);
    outcome(a == "-0.0080" && b == "0.0235", format!("q1 + delta = {a}, q2 - delta = {b}"))
}

fn model_selection_arithmetic() -> Outcome {
    let r = partial_r2(0.999960, 0.998766).unwrap();
    let f = f_ratio(0.9675, 376, 8, 2).unwrap();
    let f_gap = rel(f, 5474.78);
    outcome(
        (r - 0.9676).abs() <= 2e-4 && f_gap <= 5e-3,
        format!("partial R2 = {r:.6}, F = {f:.2} ({:.3}% from 5474.78)", 100.0 * f_gap),
    )
}

fn parameter_recovery() -> Outcome {
    let truth = reference_truth();
    let data = common::noiseless(&truth, 188);
    let tv = truth.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    let draws = 10;
    for _ in 0..draws {
        let x0: Vec<f64> = tv.iter().map(|v| v * if rng.random_bool(0.5) { 1.2 } else { 0.8 }).collect();
        let init = CompetitionParams::from_slice(ModelKind::Cdmp, &x0).unwrap();
        match fit(&data, &FitConfig::new(ModelKind::Cdmp).with_initial(init)) {
            Ok(res) => {
                for (a, b) in res.estimates.to_vec().iter().zip(&tv) {
                    worst = worst.max(rel(*a, *b));
                }
            }
            Err(_) => failures += 1,
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures == 0 && worst < 1e-3 && secs < 10.0,
        format!("{draws} perturbed starts, worst relative error {worst:.2e}, {failures} failures, {secs:.2} s"),
    )
}

fn coverage_study() -> Outcome {
    let mut sc = SimScenario::reference(0.02, 500, 7);
    sc.fitted_model = sc.fitted_model.clone().with_scale(FitScale::Instantaneous);
    let start = Instant::now();
    let report = run_study(&sc).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let cov: Vec<String> = report
        .parameters
        .iter()
        .map(|p| format!("{} {:.3}", p.name, p.coverage.unwrap_or(f64::NAN)))
        .collect();
    let inside = report
        .parameters
        .iter()
        .filter(|p| p.coverage.is_some_and(|c| (0.90..=0.98).contains(&c)))
        .count();
    outcome(
        inside >= 6 && secs < 900.0,
        format!(
            "{inside}/8 in [0.90, 0.98]; converged {}/500; {}; {secs:.1} s",
            report.n_converged,
            cov.join(", ")
        ),
    )
}

fn misspecification_ordering() -> Outcome {
    let base = SimScenario::reference(0.02, 1, 0);
    let specs = default_potential_specs();
    let mut wins = 0;
    let mut failed = 0;
    let seeds = 200;
    let mut gap = 0.0;
    for seed in 0..seeds {
        let data = generate(&SimScenario { seed, ..base.clone() }, 0).unwrap();
        let table = compare_potentials(&data, &specs);
        let g = table.row(ModelKind::Cdmp).and_then(|r| r.rho_squared);
        let c = table.row(ModelKind::Constant).and_then(|r| r.rho_squared);
        match (g, c) {
            (Some(g), Some(c)) => {
                gap += g - c;
                if g > c {
                    wins += 1;
                }
            }
            _ => failed += 1,
        }
    }
    let share = wins as f64 / seeds as f64;
    outcome(
        share >= 0.95,
        format!(
            "GGSqrt above Constant by rho2 in {wins}/{seeds} seeds ({failed} failed comparisons), mean gap {:.4}",
            gap / seeds as f64
        ),
    )
}

fn sarma_refinement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = SarmaConfig::default();
    let noise = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };

    // seasonal AR(1)_12 signal with coefficient 0.6 plus small noise;
    // fitted on 60 months, scored one step ahead on the next 12
    let (mut unref, mut refined) = (0.0, 0.0);
    let mut worst_phi: f64 = 0.0;
    for _ in 0..20 {
        let profile: Vec<f64> = (0..12)
            .map(|k| 10.0 * (std::f64::consts::TAU * k as f64 / 12.0).sin() + rng.random_range(-2.0..2.0))
            .collect();
        let mut signal = vec![0.0; 72];
        for i in 0..72 {
            signal[i] = if i < 12 { profile[i] } else { 0.6 * signal[i - 12] };
        }
        let e: Vec<f64> = signal.iter().map(|s| s + 0.05 * noise(&mut rng)).collect();
        let fit = fit_sarma(&e[..60], &cfg, 1).unwrap();
        worst_phi = worst_phi.max((fit.coefficients.seasonal_ar[0] - 0.6).abs());
        let pred = fit.one_step_ahead(&e).unwrap();
        unref += e[60..].iter().map(|v| v * v).sum::<f64>();
        refined += e[60..].iter().zip(&pred[60..]).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    let gain = 1.0 - (refined / unref).sqrt();

    // white noise: fitted on 240 months, scored on the next 60
    let (mut unref_w, mut refined_w) = (0.0, 0.0);
    for _ in 0..50 {
        let e: Vec<f64> = (0..300).map(|_| noise(&mut rng)).collect();
        let fit = fit_sarma(&e[..240], &cfg, 1).unwrap();
        let pred = fit.one_step_ahead(&e).unwrap();
        unref_w += e[240..].iter().map(|v| v * v).sum::<f64>();
        refined_w += e[240..].iter().zip(&pred[240..]).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    let degradation = (refined_w / unref_w).sqrt() - 1.0;
    outcome(
        gain >= 0.20 && degradation <= 0.05,
        format!(
            "seasonal RMSE gain {:.1}% (max |phi - 0.6| = {worst_phi:.3}); white-noise change {:+.2}%",
            100.0 * gain,
            100.0 * degradation
        ),
    )
}

fn rk4_order() -> Outcome {
    let params = CompetitionParams::case_study();
    // m ~ sqrt(t) near the start makes steps above 1/4 pre-asymptotic; below
    // 1/64 the error approaches round-off
    let (t0, t1) = (0.5, 188.0);
    let exact = brand_trajectories(t1, &params).unwrap();
    let steps = [0.25, 0.125, 0.0625, 0.03125, 0.015625];
    let errors: Vec<f64> = steps
        .iter()
        .map(|&h| {
            let cfg = IntegrationConfig::seeded(&params, t0, t1, h).unwrap();
            let last = *integrate_competition(&params, &cfg).unwrap().last().unwrap();
            (last.z1 - exact.0).abs().max((last.z2 - exact.1).abs())
        })
        .collect();
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let min = orders.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        min >= 3.7,
        format!(
            "orders {} for steps {:?}",
            orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>().join(", "),
            steps
        ),
    )
}

fn main() {
    let criteria: [Check; 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("sum identity", sum_identity),
        ("branch continuity", branch_continuity),
        ("effective coefficients", effective_coefficient_arithmetic),
        ("model selection arithmetic", model_selection_arithmetic),
        ("parameter recovery", parameter_recovery),
        ("coverage", coverage_study),
        ("misspecification ordering", misspecification_ordering),
        ("SARMA refinement", sarma_refinement),
        ("RK4 convergence order", rk4_order),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        println!("criterion {:>2} {:<28} {}  {}", i + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(i + 1);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
