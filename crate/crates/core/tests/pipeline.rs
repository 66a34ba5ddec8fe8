//! End-to-end runs through the experiment layer.

use std::fs;
use std::path::Path;

use carve_core::experiment::{run_dicke_carve, run_phase_plan, run_sweep, ExperimentConfig};

const PARAMS: &str = r#""params": { "g_mhz": 8.5, "kappa_mhz": 0.2, "gamma_e_mhz": 6.0, "delta_mhz": 66.0 }"#;

fn config(body: &str, out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_json(body).unwrap();
    cfg.output_dir = Some(out.to_path_buf());
    cfg
}

fn dicke(n: usize, carve: &str, extra: &str, out: &Path) -> ExperimentConfig {
    config(&format!(r#"{{ "kind": "dicke_carve", "n_qubits": {n}, {PARAMS}, "carve": {carve} {extra} }}"#), out)
}

#[test]
fn master_and_no_jump_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_dicke_carve(&dicke(2, r#"{ "keep_m": 1, "propagation": "master" }"#, "", &tmp.path().join("a"))).unwrap();
    let b = run_dicke_carve(&dicke(2, r#"{ "keep_m": 1, "propagation": "no_jump" }"#, "", &tmp.path().join("b"))).unwrap();
    assert!((a.epsilon - b.epsilon).abs() < 1e-6, "{} vs {}", a.epsilon, b.epsilon);
    assert!((a.success_prob - b.success_prob).abs() < 1e-6);
    assert!(a.epsilon < 0.2 && a.epsilon > 0.0);
}

#[test]
fn doubling_the_drive_quarters_the_carve_time() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |w: f64, dir: &str| {
        let carve = format!(r#"{{ "keep_m": 1, "propagation": "no_jump", "w_fraction": {w} }}"#);
        run_dicke_carve(&dicke(2, &carve, "", &tmp.path().join(dir))).unwrap()
    };
    let slow = run(0.05, "slow");
    let fast = run(0.1, "fast");
    let ratio = slow.t_1e.unwrap() / fast.t_1e.unwrap();
    assert!((ratio - 4.0).abs() < 0.4, "t_1e ratio {ratio}");
    assert!((slow.epsilon - fast.epsilon).abs() < 0.2 * slow.epsilon);
}

#[test]
fn far_detuned_tone_leaves_the_ensemble_alone() {
    let tmp = tempfile::tempdir().unwrap();
    let carve = r#"{ "keep_m": 1, "propagation": "no_jump", "tones": [{ "delta_mhz": -25.0, "omega_mhz": 0.05 }] }"#;
    let r = run_dicke_carve(&dicke(2, carve, r#", "t_final_us": 10.0"#, tmp.path())).unwrap();
    assert!(r.success_prob > 0.99, "success {}", r.success_prob);
    assert!((r.epsilon - 0.5).abs() < 0.01, "epsilon {}", r.epsilon);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for dir in ["a", "b"] {
        run_dicke_carve(&dicke(2, r#"{ "keep_m": 0, "propagation": "no_jump" }"#, "", &tmp.path().join(dir))).unwrap();
    }
    for file in ["dicke_timeseries.csv", "dicke_summary.json"] {
        assert_eq!(fs::read(tmp.path().join("a").join(file)).unwrap(), fs::read(tmp.path().join("b").join(file)).unwrap());
    }
}

#[test]
fn superposition_target_removes_only_the_middle_level() {
    // The target infidelity also carries the uncorrected Stark phase between
    // the kept levels, so only populations are compared here.
    let tmp = tempfile::tempdir().unwrap();
    let carve = r#"{ "target_amplitudes": [[1, 0], [0, 0], [1, 0]], "propagation": "no_jump" }"#;
    let r = run_dicke_carve(&dicke(2, carve, "", tmp.path())).unwrap();
    assert_eq!(r.keep, vec![0, 2]);
    assert!((r.success_prob - r.predicted_success_prob).abs() < 0.01 * r.predicted_success_prob);
    let rem: Vec<f64> = r.levels.iter().map(|l| l.remaining_fraction).collect();
    assert!(rem[1] < 1e-3, "middle level keeps {}", rem[1]);
    for l in [&r.levels[0], &r.levels[2]] {
        let expected = (-l.predicted_rate_exact * r.evaluated_at_us).exp();
        assert!((l.remaining_fraction / expected - 1.0).abs() < 0.03, "level {} keeps {rem:?}", l.m);
    }
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let body = |workers: usize| {
        format!(
            r#"{{ "kind": "sweep", "n_qubits": 2, "workers": {workers},
                 "params": {{ "g_mhz": 8.5, "kappa_mhz": 0.2, "gamma_e_mhz": 6.0, "auto_balance_n": 1 }},
                 "sweep": {{ "c_over_n": [3, 5] }} }}"#
        )
    };
    let a = run_sweep(&config(&body(1), &tmp.path().join("a"))).unwrap();
    let b = run_sweep(&config(&body(2), &tmp.path().join("b"))).unwrap();
    assert_eq!(a.points, b.points);
    assert!(a.points[1].eps_sim < a.points[0].eps_sim);
    assert_eq!(fs::read(tmp.path().join("a/sweep.csv")).unwrap(), fs::read(tmp.path().join("b/sweep.csv")).unwrap());
}

#[test]
fn verified_phase_plan_reaches_its_targets() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        r#"{ "kind": "phase_plan", "n_qubits": 3,
             "phase": { "phases": [0.0, 0.6, -0.9, 1.5], "losses": [0.0, 0.05, 0.0, 0.0],
                        "model": "physical", "c_over_n": 10000, "max_rounds": 3, "verify": true } }"#,
        tmp.path(),
    );
    let r = run_phase_plan(&cfg).unwrap();
    assert!(r.within_envelope);
    let residual = r.verification.as_ref().and_then(|v| v.final_residual()).unwrap();
    assert!(residual.max_phase < 0.01 * 1.5, "phase residual {}", residual.max_phase);
    for file in ["schedule.json", "ledger.csv", "phase_plan_summary.json"] {
        assert!(tmp.path().join(file).exists(), "{file}");
    }
}
