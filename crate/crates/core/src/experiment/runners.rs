use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DisturbanceKind, ExperimentConfig, Propagation, SweepPropagation};
use crate::analytics::{
    cf_infidelity, f_infidelity, ghz_cf_asymptote, ghz_f_asymptote, ghz_infidelity,
    plan_dicke_carve, plan_subspace_carve, predicted_t_1e, summed_infidelity, transmission, Method,
};
use crate::dynamics::{
    evolve_master, evolve_no_jump, find_t_1e, postselect_block, Diagnostics, EvolutionResult, EvolveOptions,
    Propagator,
};
use crate::error::{CarveError, Result};
use crate::fit::{exponential_fit, linear_fit, ExponentialFit};
use crate::model::{kappa_m, mhz, to_mhz, DriveTone, PhysicalParams, RateLaw, RateTable};
use crate::phase_control::{
    iterate_corrections_with, required_c_over_n, success_bound, verify_schedule_numerically, CorrectionLedger,
    PhysicalModel, Schedule, SuccessBound, TableModel, Targets, VerificationReport,
};
use crate::state_space::{build_basis, css_amplitudes, css_state, css_weights, JointState};

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<fs::File>> {
    fs::create_dir_all(dir)?;
    Ok(csv::Writer::from_path(dir.join(name))?)
}

/// Exponential decay fitted to one level's population over its first decade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDecay {
    pub m: usize,
    pub initial_population: f64,
    /// Population at t_1e (or at the end of the run) over its initial value.
    pub remaining_fraction: f64,
    /// Fitted decay rate in 1/us; absent when the decade is not resolved.
    pub fitted_rate: Option<f64>,
    pub r_squared: Option<f64>,
    /// Sum of single-tone Lorentzian rates at the dispersive resonances.
    pub predicted_rate_dispersive: f64,
    /// Same sum with dressed shifts, widths and couplings.
    pub predicted_rate_dressed: f64,
    /// Sum of exact weak-drive self-energy rates.
    pub predicted_rate_exact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DickeReport {
    pub n_qubits: usize,
    pub keep: Vec<usize>,
    pub cooperativity: f64,
    pub tones_mhz: Vec<[f64; 2]>,
    pub duration_us: f64,
    pub dt_us: f64,
    /// Time at which the down-block weight reaches the kept weight over e.
    pub t_1e: Option<f64>,
    /// Infidelity and success probability at t_1e, or at the end without a crossing.
    pub epsilon: f64,
    pub success_prob: f64,
    pub evaluated_at_us: f64,
    pub predicted_epsilon: f64,
    pub predicted_success_prob: f64,
    pub predicted_t_1e: Option<f64>,
    pub levels: Vec<LevelDecay>,
    pub max_trace_drift: f64,
    pub max_hermiticity_deviation: f64,
    pub min_eigenvalue: Option<f64>,
    pub steps: u64,
    pub warnings: Vec<String>,
}

fn diagnostics_of(d: &Diagnostics) -> (f64, f64, Option<f64>, u64) {
    (d.max_trace_drift, d.max_hermiticity_deviation, d.min_eigenvalue, d.steps)
}

fn initial_state(cfg: &ExperimentConfig, basis: &Arc<crate::state_space::JointBasis>) -> Result<JointState> {
    match cfg.carve.as_ref().and_then(|c| c.initial_state.as_ref()) {
        Some(path) => {
            let state = JointState::from_json(&fs::read_to_string(path)?)?;
            if state.n_qubits() != cfg.n_qubits {
                return Err(CarveError::BasisMismatch { expected: cfg.n_qubits, got: state.n_qubits() });
            }
            // Rebuild on the shared basis so evolution sees one Arc.
            match state.as_pure() {
                Some(v) => JointState::pure(basis.clone(), v.clone()),
                None => JointState::density(basis.clone(), state.to_density()),
            }
        }
        None => css_state(cfg.n_qubits, basis),
    }
}

/// Kept levels and the normalized target amplitudes.
fn carve_target(cfg: &ExperimentConfig) -> (Vec<usize>, DVector<Complex64>) {
    let n = cfg.n_qubits;
    let carve = cfg.carve.as_ref().expect("validated");
    let mut target = DVector::zeros(n + 1);
    match (&carve.keep_m, &carve.target_amplitudes) {
        (Some(m), _) => target[*m] = Complex64::new(1.0, 0.0),
        (None, Some(amps)) => {
            for (m, a) in amps.iter().enumerate() {
                target[m] = Complex64::new(a[0], a[1]);
            }
        }
        (None, None) => unreachable!("validated"),
    }
    let keep = (0..=n).filter(|&m| target[m].norm_sqr() > 0.0).collect();
    let norm = target.norm();
    (keep, target.unscale(norm))
}

/// Fits ln p(t) over the samples before p first drops below a tenth of p(0).
fn first_decade_fit(times: &[f64], series: &[f64]) -> Option<ExponentialFit> {
    let p0 = *series.first()?;
    if p0.is_nan() || p0 <= 0.0 {
        return None;
    }
    let end = series.iter().position(|&p| p < p0 / 10.0)?;
    if end < 4 {
        return None;
    }
    exponential_fit(&times[..end], &series[..end]).ok()
}

/// Single carve of the configured initial state: plan (or explicit tones),
/// evolve, post-select on the source atom staying down, and compare with the
/// rate-summed prediction.
pub fn run_dicke_carve(cfg: &ExperimentConfig) -> Result<DickeReport> {
    cfg.validate()?;
    let n = cfg.n_qubits;
    let params = cfg.params.resolve()?;
    let carve = cfg.carve.as_ref().expect("validated");
    let (keep, target) = carve_target(cfg);
    let opts = cfg.plan_options();
    let plan = plan_subspace_carve(n, &keep, &params, &opts)?;
    let tones: Vec<DriveTone> = match &carve.tones {
        Some(explicit) => explicit.iter().map(|t| t.resolve()).collect::<Result<_>>()?,
        None => plan.drive_tones(),
    };
    let basis = Arc::new(build_basis(n)?);
    let initial = initial_state(cfg, &basis)?;
    let weights: Vec<f64> = (0..=n).map(|m| initial.population(basis.down(m))).collect();
    let kept_weight: f64 = keep.iter().map(|&m| weights[m]).sum();
    let mut warnings = Vec::new();

    let law_rates = |law| RateTable::new(&params, &tones, n, law).total_rates();
    let dispersive = law_rates(RateLaw::Dispersive);
    let dressed = law_rates(RateLaw::Dressed);
    let exact = law_rates(RateLaw::Resolvent);
    let predicted = law_rates(opts.rate_law);
    let keep_rate = keep.iter().map(|&m| predicted[m]).fold(0.0, f64::max);
    let t_1e_pred = if keep.len() == 1 && kept_weight > 1e-12 {
        predicted_t_1e(&predicted, &weights, keep[0]).ok()
    } else {
        None
    };
    let slowest_undesired = (0..=n)
        .filter(|m| !keep.contains(m) && weights[*m] > 1e-12)
        .map(|m| predicted[m])
        .fold(f64::INFINITY, f64::min);
    let fastest = predicted.iter().copied().fold(0.0, f64::max);
    let t_final = match cfg.t_final_us {
        Some(t) => t,
        None => {
            let mut t = if keep_rate > 0.0 { 1.0 / keep_rate } else { 0.0 };
            if let Some(t1) = t_1e_pred {
                t = t.max(2.0 * t1);
            }
            if slowest_undesired.is_finite() && slowest_undesired > 0.0 {
                t = t.max(1.5 * 10f64.ln() / slowest_undesired);
            }
            if !(t.is_finite() && t > 0.0) {
                return Err(CarveError::Config("cannot infer t_final_us; give it explicitly".into()));
            }
            t
        }
    };
    let prop = Propagator::new(&params, &tones, &basis, crate::dynamics::default_frame(&tones));
    let dt = cfg.dt_us.unwrap_or_else(|| prop.max_dt());
    let mut sample = t_final / 1000.0;
    if fastest > 0.0 {
        sample = sample.min(10f64.ln() / fastest / 40.0);
    }
    // Without an explicit end time, stop shortly after the t_1e crossing.
    let stop_below_down = (cfg.t_final_us.is_none() && kept_weight > 1e-12)
        .then(|| 0.9 * kept_weight / std::f64::consts::E);
    let evolve_opts = EvolveOptions {
        sample_interval: Some(sample),
        stop_below_down,
        keep_states: false,
        track_eigenvalues: carve.propagation == Propagation::Master,
        ..Default::default()
    };
    let result = match carve.propagation {
        Propagation::Master => evolve_master(&initial, &params, &tones, t_final, dt, &evolve_opts)?,
        Propagation::NoJump => evolve_no_jump(&initial, &params, &tones, t_final, dt, &evolve_opts)?,
    };
    if let Some(dir) = &cfg.output_dir {
        fs::create_dir_all(dir)?;
        result.save_csv(&dir.join("dicke_timeseries.csv"))?;
    }

    let t_1e = if kept_weight > 1e-12 { find_t_1e(&result, kept_weight).ok() } else { None };
    if kept_weight <= 1e-12 {
        warnings.push("kept levels carry no initial weight; success probability is about zero".into());
    } else if t_1e.is_none() {
        warnings.push("down-block weight never reached kept weight / e; reporting end-of-run values".into());
    }
    let at = t_1e.unwrap_or(result.final_time());
    let block = result.down_block_at(at);
    let (epsilon, success_prob) = match postselect_block(&block) {
        Ok(outcome) => {
            let outcome = outcome.with_target_state(&target)?;
            (outcome.infidelity.unwrap_or(1.0), outcome.success_probability)
        }
        Err(CarveError::CarveAnnihilated) => {
            warnings.push("down block emptied; carve annihilated the state".into());
            (1.0, 0.0)
        }
        Err(e) => return Err(e),
    };
    let prediction = summed_infidelity(&predicted, &weights, &keep, at);
    let levels = level_decays(&result, at, [&dispersive, &dressed, &exact]);
    let (max_trace_drift, max_hermiticity_deviation, min_eigenvalue, steps) = diagnostics_of(&result.diagnostics);
    let report = DickeReport {
        n_qubits: n,
        keep,
        cooperativity: params.cooperativity(),
        tones_mhz: tones.iter().map(|t| [to_mhz(t.delta), to_mhz(t.omega)]).collect(),
        duration_us: result.final_time(),
        dt_us: dt,
        t_1e,
        epsilon,
        success_prob,
        evaluated_at_us: at,
        predicted_epsilon: prediction.epsilon,
        predicted_success_prob: prediction.success_probability,
        predicted_t_1e: t_1e_pred,
        levels,
        max_trace_drift,
        max_hermiticity_deviation,
        min_eigenvalue,
        steps,
        warnings,
    };
    if let Some(dir) = &cfg.output_dir {
        write_json(dir, "dicke_summary.json", &report)?;
    }
    Ok(report)
}

fn level_decays(
    result: &EvolutionResult,
    at: f64,
    [dispersive, dressed, exact]: [&[f64]; 3],
) -> Vec<LevelDecay> {
    let i = result.times.partition_point(|&s| s < at).min(result.len() - 1);
    (0..=result.n_qubits)
        .map(|m| {
            let series = result.level_series(m);
            let fit = first_decade_fit(&result.times, &series);
            LevelDecay {
                m,
                initial_population: series[0],
                remaining_fraction: if series[0] > 0.0 { series[i] / series[0] } else { 0.0 },
                fitted_rate: fit.map(|f| -f.slope),
                r_squared: fit.map(|f| f.r_squared),
                predicted_rate_dispersive: dispersive[m],
                predicted_rate_dressed: dressed[m],
                predicted_rate_exact: exact[m],
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub c_over_n: f64,
    pub g_mhz: f64,
    pub delta_mhz: f64,
    /// Planned duration 1/Gamma_keep.
    pub duration_us: f64,
    /// Crossing of the down-block weight through the kept weight over e.
    pub t_1e: Option<f64>,
    /// Simulated counter-factual infidelity at t_1e; absent when the point failed.
    pub eps_sim: Option<f64>,
    /// Rate-summed counter-factual prediction for the same tones at the predicted t_1e.
    pub eps_cf_summed: f64,
    /// Two-level counter-factual closed form at C/n with n = N/2.
    pub eps_cf_analytic: f64,
    /// Two-level factual closed form 1/(2 + C/n).
    pub eps_f_analytic: f64,
    pub success_prob: Option<f64>,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub n_qubits: usize,
    pub keep_m: usize,
    pub points: Vec<SweepPoint>,
    /// eps_sim = prefactor e^{slope C/N} over converged points.
    pub fit: Option<ExponentialFit>,
    /// Slope of log eps_f_analytic against log C/N.
    pub factual_log_slope: Option<f64>,
    pub excluded: Vec<f64>,
}

fn sweep_point(
    n: usize,
    keep_m: usize,
    x: f64,
    base: &PhysicalParams,
    cfg: &ExperimentConfig,
    propagation: SweepPropagation,
) -> Result<SweepPoint> {
    let c = x * n as f64;
    let g = (c * base.kappa() * base.gamma_e()).sqrt();
    let params = PhysicalParams::balanced(g, base.kappa(), base.gamma_e(), n / 2)?;
    let plan = plan_dicke_carve(n, keep_m, &params, &cfg.plan_options())?;
    let rates = RateTable::new(&params, &plan.drive_tones(), n, plan.rate_law).total_rates();
    let weights = css_weights(n);
    let t_pred = predicted_t_1e(&rates, &weights, keep_m)?;
    let prediction = summed_infidelity(&rates, &weights, &[keep_m], t_pred);
    let half = (n / 2).max(1) as f64;
    let mut point = SweepPoint {
        c_over_n: x,
        g_mhz: to_mhz(g),
        delta_mhz: to_mhz(params.delta_cap()),
        duration_us: plan.duration,
        t_1e: None,
        eps_sim: None,
        eps_cf_summed: prediction.epsilon,
        eps_cf_analytic: cf_infidelity(c, half),
        eps_f_analytic: f_infidelity(c, half),
        success_prob: None,
        converged: false,
        error: None,
    };
    let basis = Arc::new(build_basis(n)?);
    let tones = plan.drive_tones();
    let prop = Propagator::new(&params, &tones, &basis, 0.0);
    let dt = cfg.dt_us.unwrap_or_else(|| prop.max_dt());
    let initial = css_state(n, &basis)?;
    let kept_weight = weights[keep_m];
    let opts = EvolveOptions {
        sample_interval: Some(plan.duration / 200.0),
        stop_below_down: Some(0.9 * kept_weight / std::f64::consts::E),
        keep_states: false,
        track_eigenvalues: false,
        ..Default::default()
    };
    let t_final = 2.0 * plan.duration;
    let run = match propagation {
        SweepPropagation::NoJump => evolve_no_jump(&initial, &params, &tones, t_final, dt, &opts),
        SweepPropagation::Master => evolve_master(&initial, &params, &tones, t_final, dt, &opts),
    };
    let outcome = run.and_then(|r| {
        let t = find_t_1e(&r, kept_weight)?;
        let o = postselect_block(&r.down_block_at(t))?.with_target_level(keep_m)?;
        Ok((t, o))
    });
    match outcome {
        Ok((t, o)) => {
            let eps = o.infidelity.unwrap_or(f64::NAN);
            point.t_1e = Some(t);
            point.eps_sim = Some(eps);
            point.success_prob = Some(o.success_probability);
            point.converged = eps.is_finite() && eps > 0.0;
        }
        Err(e) => point.error = Some(e.to_string()),
    }
    Ok(point)
}

/// Scans C/N by varying g at fixed kappa and gamma_e, re-balancing Delta at
/// level N/2, and carves the CSS onto N/2 (or the configured keep_m) at every
/// point. Points run in parallel; the table keeps grid order.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let n = cfg.n_qubits;
    let sweep = cfg.sweep.as_ref().expect("validated");
    let keep_m = cfg.carve.as_ref().and_then(|c| c.keep_m).unwrap_or(n / 2);
    let base = PhysicalParams::from_mhz(cfg.params.g_mhz, cfg.params.kappa_mhz, cfg.params.gamma_e_mhz, 1.0)?;
    let work = || -> Result<Vec<SweepPoint>> {
        sweep.c_over_n.par_iter().map(|&x| sweep_point(n, keep_m, x, &base, cfg, sweep.propagation)).collect()
    };
    let points = match cfg.workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| CarveError::Config(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        points.iter().filter(|p| p.converged).map(|p| (p.c_over_n, p.eps_sim.unwrap_or(f64::NAN))).unzip();
    let excluded = points.iter().filter(|p| !p.converged).map(|p| p.c_over_n).collect();
    let fit = if xs.len() >= 2 { exponential_fit(&xs, &ys).ok() } else { None };
    let logs = |v: &[f64]| v.iter().map(|z| z.ln()).collect::<Vec<_>>();
    let grid: Vec<f64> = points.iter().map(|p| p.c_over_n).collect();
    let f_curve: Vec<f64> = points.iter().map(|p| p.eps_f_analytic).collect();
    let factual_log_slope = linear_fit(&logs(&grid), &logs(&f_curve)).ok().map(|f| f.slope);
    let report = SweepReport { n_qubits: n, keep_m, points, fit, factual_log_slope, excluded };
    if let Some(dir) = &cfg.output_dir {
        let mut w = csv_writer(dir, "sweep.csv")?;
        w.write_record([
            "c_over_n",
            "g_mhz",
            "delta_mhz",
            "duration_us",
            "t_1e_us",
            "eps_sim",
            "eps_cf_summed",
            "eps_cf_analytic",
            "eps_f_analytic",
            "success_prob",
            "converged",
        ])?;
        let opt = |v: Option<f64>| v.map_or_else(String::new, |z| z.to_string());
        for p in &report.points {
            w.write_record([
                p.c_over_n.to_string(),
                p.g_mhz.to_string(),
                p.delta_mhz.to_string(),
                p.duration_us.to_string(),
                opt(p.t_1e),
                opt(p.eps_sim),
                p.eps_cf_summed.to_string(),
                p.eps_cf_analytic.to_string(),
                p.eps_f_analytic.to_string(),
                opt(p.success_prob),
                p.converged.to_string(),
            ])?;
        }
        w.flush()?;
        write_json(dir, "sweep_fit.json", &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GhzCurveRow {
    pub c_over_n: f64,
    pub eps_cf: f64,
    pub eps_f: f64,
    pub eps_cf_asymptote: f64,
    pub eps_f_asymptote: f64,
}

/// Counter-factual and factual GHZ infidelities from the ladder sums, with
/// their large-C/N asymptotes.
pub fn run_ghz_curve(cfg: &ExperimentConfig) -> Result<Vec<GhzCurveRow>> {
    cfg.validate()?;
    let ghz = cfg.ghz.as_ref().expect("validated");
    let n = cfg.n_qubits;
    let rows: Vec<GhzCurveRow> = ghz
        .c_over_n
        .iter()
        .map(|&x| {
            let c = x * n as f64;
            GhzCurveRow {
                c_over_n: x,
                eps_cf: ghz_infidelity(c, n, Method::Counterfactual, ghz.j_max),
                eps_f: ghz_infidelity(c, n, Method::Factual, ghz.j_max),
                eps_cf_asymptote: ghz_cf_asymptote(x),
                eps_f_asymptote: ghz_f_asymptote(x),
            }
        })
        .collect();
    if let Some(dir) = &cfg.output_dir {
        let mut w = csv_writer(dir, "ghz_curve.csv")?;
        for row in &rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePlanReport {
    pub n_qubits: usize,
    pub cooperativity: f64,
    pub b: f64,
    pub model: DisturbanceKind,
    pub targets: Targets,
    pub two_x: f64,
    pub required_c_over_n: f64,
    pub rounds: usize,
    pub n_pulses: usize,
    pub total_duration_us: f64,
    pub residual: f64,
    pub within_envelope: bool,
    pub success_bound: SuccessBound,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationReport>,
    #[serde(skip)]
    pub schedule: Schedule,
    #[serde(skip)]
    pub ledger: Option<CorrectionLedger>,
}

fn random_targets(n: usize, seed: u64) -> Targets {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases = (0..=n).map(|_| rng.random_range(-PI..PI)).collect();
    let losses = (0..=n).map(|_| rng.random_range(0.0..0.5)).collect();
    Targets { phases, losses }
}

/// Plans the iterative phase/amplitude corrections for the configured
/// targets and, when asked, replays the schedule through exact propagation.
pub fn run_phase_plan(cfg: &ExperimentConfig) -> Result<PhasePlanReport> {
    cfg.validate()?;
    let n = cfg.n_qubits;
    let phase = cfg.phase.as_ref().expect("validated");
    let targets = match (&phase.phases, &phase.losses) {
        (None, None) => random_targets(n, cfg.seed.unwrap_or(0)),
        (p, l) => Targets::new(
            p.clone().unwrap_or_else(|| vec![0.0; n + 1]),
            l.clone().unwrap_or_else(|| vec![0.0; n + 1]),
        )?,
    };
    let mut params = cfg.params.resolve()?;
    if let Some(x) = phase.c_over_n {
        let g = (x * n as f64 * params.kappa() * params.gamma_e()).sqrt();
        params = PhysicalParams::balanced(g, params.kappa(), params.gamma_e(), (n / 2).max(1))?;
    }
    if phase.verify && phase.model != DisturbanceKind::Physical {
        return Err(CarveError::Config("verification needs the physical disturbance model".into()));
    }
    let planned = match phase.model {
        DisturbanceKind::Table => iterate_corrections_with(
            &TableModel::new(params.cooperativity(), n),
            &targets,
            phase.b,
            phase.max_rounds,
            phase.tol,
        ),
        DisturbanceKind::Physical => iterate_corrections_with(
            &PhysicalModel::with_default_coupling(params, n),
            &targets,
            phase.b,
            phase.max_rounds,
            phase.tol,
        ),
    };
    let (schedule, ledger) = planned?;
    let bound = success_bound(&ledger, phase.b)?;
    let verification = if phase.verify {
        let initial = DVector::from_iterator(n + 1, css_amplitudes(n).into_iter().map(|a| Complex64::new(a, 0.0)));
        Some(verify_schedule_numerically(&schedule, &targets, &params, &initial)?)
    } else {
        None
    };
    let report = PhasePlanReport {
        n_qubits: n,
        cooperativity: params.cooperativity(),
        b: phase.b,
        model: phase.model,
        targets,
        two_x: ledger.two_x(),
        required_c_over_n: required_c_over_n(n, phase.b),
        rounds: ledger.rounds.len(),
        n_pulses: schedule.n_pulses(),
        total_duration_us: schedule.total_duration(),
        residual: ledger.residual,
        within_envelope: ledger.within_envelope(),
        success_bound: bound,
        verification,
        schedule,
        ledger: Some(ledger),
    };
    if let Some(dir) = &cfg.output_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("schedule.json"), report.schedule.to_json()? + "\n")?;
        if let Some(ledger) = &report.ledger {
            ledger.save_csv(dir.join("ledger.csv"))?;
        }
        write_json(dir, "phase_plan_summary.json", &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub delta_mhz: f64,
    /// Single-tone decay rate of each level (Lorentzian at (m+1)d), 1/us.
    pub gamma: Vec<f64>,
    /// Probe transmission |T(delta, m)|^2 of each level.
    pub transmission: Vec<f64>,
}

/// Per-level decay rates and transmissions over a detuning grid.
pub fn run_spectrum(cfg: &ExperimentConfig) -> Result<Vec<SpectrumRow>> {
    cfg.validate()?;
    let n = cfg.n_qubits;
    let spec = cfg.spectrum.as_ref().expect("validated");
    let params = cfg.params.resolve()?;
    let w = spec.w_fraction * kappa_m(&params, 0);
    let step = (spec.delta_max_mhz - spec.delta_min_mhz) / (spec.points - 1) as f64;
    let rows: Vec<SpectrumRow> = (0..spec.points)
        .map(|i| {
            let delta_mhz = spec.delta_min_mhz + step * i as f64;
            let delta = mhz(delta_mhz);
            let tone = DriveTone::from_w(delta, w, &params)?;
            Ok(SpectrumRow {
                delta_mhz,
                gamma: (0..=n).map(|m| crate::model::gamma_m(&params, &tone, m)).collect(),
                transmission: (0..=n).map(|m| transmission(delta, m, &params).norm_sqr()).collect(),
            })
        })
        .collect::<Result<_>>()?;
    if let Some(dir) = &cfg.output_dir {
        let mut w = csv_writer(dir, "spectrum.csv")?;
        let mut header = vec!["delta_mhz".to_string()];
        header.extend((0..=n).map(|m| format!("gamma_m{m}")));
        header.extend((0..=n).map(|m| format!("transmission_m{m}")));
        w.write_record(&header)?;
        for row in &rows {
            let mut rec = vec![row.delta_mhz.to_string()];
            rec.extend(row.gamma.iter().chain(&row.transmission).map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    Ok(rows)
}
