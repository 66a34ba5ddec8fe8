//! Acceptance suite: one PASS/FAIL line per criterion, run sequentially so
//! that wall-clock limits are measured without contention. Exits nonzero if
//! any criterion fails.

use std::f64::consts::{E, PI};
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use carve_core::analytics::{
    cf_infidelity, f_infidelity, f_infidelity_transmission, ghz_cf_asymptote, ghz_f_asymptote, ghz_infidelity,
    Method,
};
use carve_core::dynamics::{evolve_master, evolve_no_jump, EvolveOptions, TwoLevelModel};
use carve_core::experiment::{run_dicke_carve, run_sweep, DickeReport, ExperimentConfig};
use carve_core::model::{kappa_m, mhz, optimal_delta_cap, DriveTone, PhysicalParams, RateLaw};
use carve_core::phase_control::{
    amplitude_pulse, disturbance, iterate_corrections, iterate_corrections_with, required_c_over_n, stark_pulse,
    success_bound, verify_schedule_numerically, PhysicalModel, PulseKind, Targets,
};
use carve_core::{build_basis, css_state};

struct Suite {
    failures: Vec<String>,
}

impl Suite {
    fn check(&mut self, id: &str, pass: bool, detail: String) {
        println!("[{}] {id}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failures.push(id.to_string());
        }
    }

    fn info(&self, id: &str, detail: String) {
        println!("[INFO] {id}: {detail}");
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn reference_config(dt_us: Option<f64>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_json(
        r#"{"kind": "dicke_carve", "n_qubits": 4,
            "params": {"g_mhz": 8.5, "kappa_mhz": 0.2, "gamma_e_mhz": 6.0, "delta_mhz": 66.0},
            "carve": {"keep_m": 2, "propagation": "master"}}"#,
    )
    .expect("valid config");
    cfg.dt_us = dt_us;
    cfg
}

fn criterion_1(s: &mut Suite) -> (DickeReport, Duration) {
    let started = Instant::now();
    let report = run_dicke_carve(&reference_config(None)).expect("reference run");
    let elapsed = started.elapsed();
    let undesired: Vec<_> = report.levels.iter().filter(|l| l.m != 2).collect();

    let worst_r2 = undesired.iter().map(|l| l.r_squared.unwrap_or(0.0)).fold(1.0, f64::min);
    s.check("C1 first-decade log-linear fits", worst_r2 >= 0.99, format!("worst R^2 = {worst_r2:.6} (>= 0.99)"));

    let dev = |f: &dyn Fn(&carve_core::experiment::LevelDecay) -> f64| -> Vec<f64> {
        undesired.iter().map(|l| rel(l.fitted_rate.unwrap_or(0.0), f(l))).collect()
    };
    let lorentzian = dev(&|l| l.predicted_rate_dispersive);
    let worst = lorentzian.iter().copied().fold(0.0, f64::max);
    s.check(
        "C1 fitted rates vs dispersive Lorentzian sums",
        worst <= 0.10,
        format!("relative deviations m=0,1,3,4: {:.3?} (<= 0.10)", lorentzian),
    );
    let exact = dev(&|l| l.predicted_rate_exact);
    s.info(
        "C1 fitted rates vs exact self-energy sums",
        format!("relative deviations m=0,1,3,4: {:.3?}", exact),
    );

    let worst_left = undesired.iter().map(|l| l.remaining_fraction).fold(0.0, f64::max);
    s.check(
        "C1 undesired levels suppressed by t_1e",
        worst_left < 0.10 && report.t_1e.is_some(),
        format!("largest remaining fraction {worst_left:.2e} (< 0.10) at t_1e = {:.1} us", report.t_1e.unwrap_or(f64::NAN)),
    );
    let kept = report.levels[2].remaining_fraction;
    s.info("C1 kept level at t_1e", format!("m=2 keeps {kept:.4} of its weight (1/e = {:.4})", 1.0 / E));
    s.check("C1 runtime", elapsed.as_secs_f64() < 60.0, format!("{:.1} s (< 60 s)", elapsed.as_secs_f64()));
    s.info("C1 infidelity", format!("epsilon {:.4e}, success {:.4}", report.epsilon, report.success_prob));
    (report, elapsed)
}

fn sweep_config(n: usize, grid: &[f64]) -> ExperimentConfig {
    let text = format!(
        r#"{{"kind": "sweep", "n_qubits": {n},
            "params": {{"g_mhz": 8.5, "kappa_mhz": 0.2, "gamma_e_mhz": 6.0, "auto_balance_n": {}}},
            "sweep": {{"c_over_n": {grid:?}}}}}"#,
        n / 2
    );
    ExperimentConfig::from_json(&text).expect("valid sweep config")
}

fn criterion_2(s: &mut Suite) {
    let grid = [4.0, 6.5, 9.0, 12.0, 15.0, 20.0];
    let started = Instant::now();
    let n8 = run_sweep(&sweep_config(8, &grid)).expect("N=8 sweep");
    let n4 = run_sweep(&sweep_config(4, &grid)).expect("N=4 sweep");
    let elapsed = started.elapsed();
    let fit = n8.fit.expect("fit over converged points");
    s.check(
        "C2 N=8 slope",
        fit.n_points >= 6 && (fit.slope + 0.41).abs() <= 0.25 * 0.41,
        format!("{:.4} over {} points, R^2 {:.4} (-0.41 +/- 25%)", fit.slope, fit.n_points, fit.r_squared),
    );
    s.check(
        "C2 N=8 prefactor",
        (fit.prefactor - 1.9).abs() <= 0.5 * 1.9,
        format!("{:.4} (1.9 +/- 50%)", fit.prefactor),
    );
    let above: Vec<String> = n4
        .points
        .iter()
        .filter(|p| p.eps_sim.unwrap_or(1.0) >= p.eps_f_analytic)
        .map(|p| format!("C/N={} eps={:.3e} vs {:.3e}", p.c_over_n, p.eps_sim.unwrap_or(f64::NAN), p.eps_f_analytic))
        .collect();
    s.check(
        "C2 N=4 below factual curve 1/(2+C/n)",
        above.is_empty(),
        if above.is_empty() { "all grid points below".into() } else { format!("above at {}", above.join("; ")) },
    );
    s.check("C2 runtime", elapsed.as_secs_f64() < 900.0, format!("{:.1} s (< 900 s)", elapsed.as_secs_f64()));
}

fn criterion_3(s: &mut Suite) {
    let kappa = mhz(0.2);
    let mut worst = [0.0_f64; 3];
    let mut factual_late = 0.0_f64;
    for c_over_n in [4.0, 9.0, 16.0, 25.0] {
        let model = TwoLevelModel::new(kappa, c_over_n, 1.0 / 50.0).expect("valid two-level model");
        let [driven, neighbour] = model.predicted_rates();
        let run = model.run(1.0 / neighbour);
        worst[0] = worst[0].max(rel(run.counterfactual_infidelity(), cf_infidelity(c_over_n, 1.0)));
        worst[2] = worst[2].max(rel(run.success_probability(), (-1.0f64).exp() / 2.0));
        // The factual closed form is the rate ratio of the first emission,
        // valid while both branches are still nearly full.
        let early = model.run(0.05 / driven);
        worst[1] = worst[1].max(rel(early.factual_infidelity(), f_infidelity(c_over_n, 1.0)));
        factual_late = factual_late.max(rel(run.factual_infidelity(), f_infidelity(c_over_n, 1.0)));
    }
    s.check("C3 counter-factual closed form", worst[0] <= 0.10, format!("worst relative error {:.4} (<= 0.10)", worst[0]));
    s.check(
        "C3 factual closed form (early herald)",
        worst[1] <= 0.10,
        format!("worst relative error {:.4} at t = 0.05/Gamma_n (<= 0.10)", worst[1]),
    );
    s.info(
        "C3 factual herald at t = 1/Gamma_(n+1)",
        format!("worst relative error {factual_late:.2}; both branches have emitted by then"),
    );
    s.check("C3 success probability e^-1/2", worst[2] <= 0.05, format!("worst relative error {:.4} (<= 0.05)", worst[2]));
}

fn criterion_4(s: &mut Suite) {
    let n = 1000;
    let grid = [10.0, 12.0, 15.0, 20.0, 25.0, 30.0];
    let (mut cf, mut f) = (0.0_f64, 0.0_f64);
    for &x in &grid {
        let c = x * n as f64;
        cf = cf.max(rel(ghz_infidelity(c, n, Method::Counterfactual, 10_000), ghz_cf_asymptote(x)));
        f = f.max(rel(ghz_infidelity(c, n, Method::Factual, 10_000), ghz_f_asymptote(x)));
    }
    s.check("C4 counter-factual asymptote (C/N >= 10)", cf <= 0.05, format!("worst relative gap {cf:.4} (<= 0.05)"));
    s.check("C4 factual asymptote (C/N >= 10)", f <= 0.05, format!("worst relative gap {f:.4} (<= 0.05)"));
    let mut worst = 0.0_f64;
    for x in [1.0, 2.0, 5.0, 10.0, 15.0, 20.0, 30.0] {
        let c = x * n as f64;
        for method in [Method::Counterfactual, Method::Factual] {
            worst = worst.max(rel(ghz_infidelity(c, n, method, 10_000), ghz_infidelity(c, n, method, 1_000)));
        }
    }
    s.check("C4 truncation j_max 1e3 -> 1e4", worst < 1e-3, format!("worst relative change {worst:.2e} (< 1e-3)"));
}

/// Normalized overlap tr(A B) / (tr A tr B) of two down-block densities.
fn block_fidelity(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a * b).trace().re / (a.trace().re * b.trace().re)
}

fn criterion_5(s: &mut Suite) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x005e_edc5);
    let mut worst = 0.0_f64;
    for i in 0..20 {
        let n = if i % 2 == 0 { 2 } else { 4 };
        let (kappa, gamma_e) = (mhz(0.2), mhz(6.0));
        let g = mhz(rng.random_range(4.0..12.0));
        let delta = optimal_delta_cap(g, kappa, gamma_e, n / 2).unwrap() * rng.random_range(0.8..1.25);
        let params = PhysicalParams::new(g, kappa, gamma_e, delta).unwrap();
        let w = kappa_m(&params, 0) * rng.random_range(1.0 / 15.0..1.0 / 8.0);
        let n_tones = rng.random_range(1..=2);
        let tones: Vec<DriveTone> = (0..n_tones)
            .map(|_| {
                let m = rng.random_range(0..=n);
                let offset = rng.random_range(-1.0..1.0) * RateLaw::Dressed.linewidth(&params, m);
                DriveTone::from_w(RateLaw::Dressed.resonance(&params, m) + offset, w, &params).unwrap()
            })
            .collect();
        let fastest = (0..=n)
            .map(|m| tones.iter().map(|t| RateLaw::Resolvent.rates(&params, t, m).0).sum::<f64>())
            .fold(0.0, f64::max);
        let t = rng.random_range(0.5..1.5) / fastest;
        let basis = Arc::new(build_basis(n).unwrap());
        let psi = css_state(n, &basis).unwrap();
        let prop = carve_core::dynamics::Propagator::new(&params, &tones, &basis, 0.0);
        let opts = EvolveOptions { sample_interval: Some(t), keep_states: false, ..Default::default() };
        let master = evolve_master(&psi, &params, &tones, t, prop.max_dt(), &opts).unwrap();
        let nojump = evolve_no_jump(&psi, &params, &tones, t, prop.max_dt(), &opts).unwrap();
        let f = block_fidelity(master.down_blocks.last().unwrap(), nojump.down_blocks.last().unwrap());
        worst = worst.max(1.0 - f);
    }
    s.check(
        "C5 master vs no-jump conditional state (20 configs)",
        worst <= 1e-6,
        format!("worst infidelity {worst:.2e} (<= 1e-6)"),
    );
}

fn criterion_6(s: &mut Suite, reference: &DickeReport) {
    s.check(
        "C6 trace conservation",
        reference.max_trace_drift <= 1e-8,
        format!("max drift {:.2e} over {} steps (<= 1e-8)", reference.max_trace_drift, reference.steps),
    );
    let min_eig = reference.min_eigenvalue.unwrap_or(f64::NEG_INFINITY);
    s.check("C6 positivity", min_eig >= -1e-8, format!("min eigenvalue {min_eig:.2e} (>= -1e-8)"));
    s.check(
        "C6 Hermiticity",
        reference.max_hermiticity_deviation <= 1e-10,
        format!("max deviation {:.2e} (<= 1e-10)", reference.max_hermiticity_deviation),
    );
    let halved = run_dicke_carve(&reference_config(Some(reference.dt_us / 2.0))).expect("halved-step run");
    let change = rel(halved.epsilon, reference.epsilon);
    s.check(
        "C6 step halving",
        change < 0.01,
        format!("epsilon {:.6e} -> {:.6e}, change {change:.2e} (< 0.01)", reference.epsilon, halved.epsilon),
    );
}

fn table_oracle(kind: PulseKind, magnitude: f64, m: usize, k: usize, c: f64, n: usize, b: f64) -> (f64, f64) {
    let dist = k as f64 - m as f64;
    let n_over_c = n as f64 / c;
    match kind {
        PulseKind::Amplitude => (magnitude * n_over_c / dist.powi(2), magnitude * n_over_c.sqrt() / (2.0 * dist)),
        PulseKind::Phase => {
            (4.0 * magnitude.abs() * b * n_over_c / dist.powi(2), 2.0 * magnitude * b * n_over_c.sqrt() / dist)
        }
    }
}

fn criterion_7(s: &mut Suite) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7ab1e);
    let mut worst = 0.0_f64;
    for _ in 0..2000 {
        let n = rng.random_range(2..=16);
        let c = n as f64 * 10f64.powf(rng.random_range(1.0..6.0));
        let b = rng.random_range(1.0..6.0);
        let m = rng.random_range(0..=n);
        let k = (m + rng.random_range(1..=n)) % (n + 1);
        let (kind, pulse) = if rng.random_bool(0.5) {
            let phi = rng.random_range(-PI..PI);
            (PulseKind::Phase, stark_pulse(m, phi, b, 1.0, 0.02).unwrap())
        } else {
            (PulseKind::Amplitude, amplitude_pulse(m, rng.random_range(0.0..2.0), 1.0, 0.02).unwrap())
        };
        let got = disturbance(&pulse, k, c, n, b).unwrap();
        let want = table_oracle(kind, pulse.magnitude, m, k, c, n, b);
        for (g, w) in [(got.0, want.0), (got.1, want.1)] {
            if w != 0.0 {
                worst = worst.max(rel(g, w));
            }
        }
    }
    s.check("C7 neighbour table", worst <= 4.0 * f64::EPSILON, format!("worst relative deviation {worst:.1e}"));

    let mut envelope_ok = 0;
    let mut bound_gap = 0.0_f64;
    for _ in 0..50 {
        let n = [4, 8, 12][rng.random_range(0..3)];
        let b = rng.random_range(2.0..5.0);
        let c = n as f64 * required_c_over_n(n, b) * rng.random_range(2.0..20.0);
        let phases = (0..=n).map(|_| rng.random_range(-PI..PI)).collect();
        let losses = (0..=n).map(|_| rng.random_range(0.0..0.5)).collect();
        let targets = Targets::new(phases, losses).unwrap();
        let (_, ledger) = iterate_corrections(&targets, c, n, b, 12, 0.0).unwrap();
        if ledger.within_envelope() {
            envelope_ok += 1;
        }
        let bound = success_bound(&ledger, b).unwrap();
        let deep = carve_core::phase_control::partial_bound(
            ledger.initial_phi_max(),
            ledger.initial_total(),
            ledger.two_x(),
            b,
            10_000,
        );
        bound_gap = bound_gap.max((bound.limit - deep).abs());
    }
    s.check("C7 (2x)^T envelope on 50 target sets", envelope_ok == 50, format!("{envelope_ok}/50 within envelope"));
    s.check("C7 success-bound limit vs partial product", bound_gap <= 1e-9, format!("max gap {bound_gap:.2e} (<= 1e-9)"));

    let mut worst_phase = 0.0_f64;
    for _ in 0..5 {
        let n = 4;
        let kappa = mhz(0.2);
        let gamma_e = mhz(6.0);
        let c_over_n = 1e4;
        let g = (c_over_n * n as f64 * kappa * gamma_e).sqrt();
        let params = PhysicalParams::balanced(g, kappa, gamma_e, n / 2).unwrap();
        let phases: Vec<f64> =
            (0..=n).map(|_| rng.random_range(0.2..PI) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let targets = Targets::new(phases.clone(), vec![0.0; n + 1]).unwrap();
        let model = PhysicalModel::with_default_coupling(params, n);
        let (schedule, _) = iterate_corrections_with(&model, &targets, 3.0, 3, 0.0).unwrap();
        let amps = carve_core::state_space::css_amplitudes(n);
        let initial = DVector::from_iterator(n + 1, amps.into_iter().map(|a| Complex64::new(a, 0.0)));
        let report = verify_schedule_numerically(&schedule, &targets, &params, &initial).unwrap();
        let last = report.final_residual().expect("three rounds");
        for (m, r) in last.phase.iter().enumerate() {
            if let Some(r) = r {
                worst_phase = worst_phase.max(r.abs() / phases[m].abs());
            }
        }
    }
    s.check(
        "C7 numerical verifier after 3 rounds (N=4, C/N=1e4)",
        worst_phase <= 0.05,
        format!("worst phase residual {:.2}% of target (<= 5%)", 100.0 * worst_phase),
    );
}

fn criterion_8(s: &mut Suite) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x8);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let n = rng.random_range(1.0..100.0_f64).round();
        let c = n * 10f64.powf(rng.random_range(-2.0..4.0));
        worst = worst.max(rel(f_infidelity_transmission(c, n), f_infidelity(c, n)));
    }
    s.check("C8 transmission route", worst <= 4.0 * f64::EPSILON, format!("worst relative deviation {worst:.1e}"));
}

fn main() {
    let mut suite = Suite { failures: Vec::new() };
    let started = Instant::now();
    let (reference, _) = criterion_1(&mut suite);
    criterion_2(&mut suite);
    criterion_3(&mut suite);
    criterion_4(&mut suite);
    criterion_5(&mut suite);
    criterion_6(&mut suite, &reference);
    criterion_7(&mut suite);
    criterion_8(&mut suite);
    println!("acceptance finished in {:.1} s", started.elapsed().as_secs_f64());
    if suite.failures.is_empty() {
        println!("all criteria pass");
    } else {
        println!("{} failing: {}", suite.failures.len(), suite.failures.join(", "));
        std::process::exit(1);
    }
}
