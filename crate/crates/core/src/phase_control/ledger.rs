use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::physical::{DisturbanceModel, TableModel};
use super::{
    convergence_factor, harmonic_constant, required_c_over_n, square_constant, wrap_phase, PulseSpec,
};
use crate::error::{CarveError, Result};

/// Desired per-level phases (rad) and log-population reductions, N+1 each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub phases: Vec<f64>,
    pub losses: Vec<f64>,
}

impl Targets {
    pub fn zeros(n_qubits: usize) -> Self {
        Self { phases: vec![0.0; n_qubits + 1], losses: vec![0.0; n_qubits + 1] }
    }

    pub fn new(phases: Vec<f64>, losses: Vec<f64>) -> Result<Self> {
        let t = Self { phases, losses };
        t.check(t.phases.len().saturating_sub(1))?;
        Ok(t)
    }

    pub fn check(&self, n_qubits: usize) -> Result<()> {
        for v in [&self.phases, &self.losses] {
            if v.len() != n_qubits + 1 {
                return Err(CarveError::BasisMismatch { expected: n_qubits, got: v.len().saturating_sub(1) });
            }
        }
        if let Some(&p) = self.phases.iter().find(|p| !(p.is_finite() && p.abs() <= std::f64::consts::PI)) {
            return Err(CarveError::PhaseOutOfRange(p));
        }
        if let Some(&l) = self.losses.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(CarveError::NegativeAmplitude(l));
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.phases.len() - 1
    }
}

/// Pulses grouped by correction round, applied in order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub rounds: Vec<Vec<PulseSpec>>,
}

impl Schedule {
    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn n_pulses(&self) -> usize {
        self.rounds.iter().map(Vec::len).sum()
    }

    pub fn total_duration(&self) -> f64 {
        self.rounds.iter().flatten().map(|p| p.duration).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRound {
    pub round: usize,
    /// Signed phase applied to each level this round.
    pub phases: Vec<f64>,
    /// Leveling reduction applied to each level this round.
    pub amplitudes: Vec<f64>,
    pub phi_max: f64,
    pub ell_max: f64,
    /// (2x)^T (phi_max + ell_max of round 0).
    pub envelope: f64,
    /// Partial product of the success bound through this round.
    pub success_bound: f64,
    /// Success probability implied by the model's accumulated common loss.
    pub predicted_success: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionLedger {
    pub n_qubits: usize,
    pub cooperativity: f64,
    pub b: f64,
    /// 2 (1 + ln N).
    pub harmonic_constant: f64,
    /// pi^2 / 3.
    pub square_constant: f64,
    pub x: f64,
    pub rounds: Vec<LedgerRound>,
    /// Largest residual error left after the last round.
    pub residual: f64,
}

impl CorrectionLedger {
    pub fn two_x(&self) -> f64 {
        2.0 * self.x
    }

    /// phi_max + ell_max of round 0.
    pub fn initial_total(&self) -> f64 {
        self.rounds.first().map_or(0.0, |r| r.phi_max + r.ell_max)
    }

    pub fn initial_phi_max(&self) -> f64 {
        self.rounds.first().map_or(0.0, |r| r.phi_max)
    }

    /// True when every round sits inside the geometric envelope.
    pub fn within_envelope(&self) -> bool {
        self.rounds.iter().all(|r| r.phi_max + r.ell_max <= r.envelope * (1.0 + 1e-9) + 1e-15)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["round", "phi_max", "ell_max", "envelope", "success_bound", "predicted_success"])?;
        for r in &self.rounds {
            w.write_record([
                r.round.to_string(),
                format!("{:.12e}", r.phi_max),
                format!("{:.12e}", r.ell_max),
                format!("{:.12e}", r.envelope),
                format!("{:.12e}", r.success_bound),
                format!("{:.12e}", r.predicted_success),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Planner on the neighbour table for an ensemble of N qubits at cooperativity C.
pub fn iterate_corrections(
    targets: &Targets,
    c: f64,
    n_qubits: usize,
    b: f64,
    max_rounds: usize,
    tol: f64,
) -> Result<(Schedule, CorrectionLedger)> {
    iterate_corrections_with(&TableModel::new(c, n_qubits), targets, b, max_rounds, tol)
}

/// Round 0 applies the target phases; each later round negates the phase
/// errors the model predicts. Every round ends with a leveling pulse that
/// lowers each level to the most reduced one. Stops once the remaining phase
/// error plus loss spread is at most `tol`, or after `max_rounds`.
pub fn iterate_corrections_with<M: DisturbanceModel>(
    model: &M,
    targets: &Targets,
    b: f64,
    max_rounds: usize,
    tol: f64,
) -> Result<(Schedule, CorrectionLedger)> {
    let n = model.n_qubits();
    targets.check(n)?;
    if !(b.is_finite() && b >= 1.0) {
        return Err(CarveError::BadLinewidthDetuning(b));
    }
    let c = model.cooperativity();
    let x = convergence_factor(c, n, b);
    if 2.0 * x >= 1.0 {
        return Err(CarveError::NonConvergent { two_x: 2.0 * x, required_c_over_n: required_c_over_n(n, b) });
    }
    let mut ledger = CorrectionLedger {
        n_qubits: n,
        cooperativity: c,
        b,
        harmonic_constant: harmonic_constant(n),
        square_constant: square_constant(),
        x,
        rounds: Vec::new(),
        residual: 0.0,
    };
    let mut schedule = Schedule::default();
    let levels = n + 1;
    let mut phase = vec![0.0; levels];
    let mut loss = vec![0.0; levels];
    let apply = |pulse: &PulseSpec, phase: &mut [f64], loss: &mut [f64]| {
        for (k, (l, p)) in model.effects(pulse).into_iter().enumerate() {
            loss[k] += l;
            phase[k] += p;
        }
    };
    let residual = |phase: &[f64], loss: &[f64]| {
        let phase_err = (0..levels).map(|k| wrap_phase(targets.phases[k] - phase[k]).abs()).fold(0.0, f64::max);
        let excess: Vec<f64> = (0..levels).map(|k| loss[k] - targets.losses[k]).collect();
        let spread = excess.iter().copied().fold(f64::MIN, f64::max) - excess.iter().copied().fold(f64::MAX, f64::min);
        phase_err + spread
    };

    let mut bound = 1.0;
    for round in 0..max_rounds {
        ledger.residual = residual(&phase, &loss);
        if ledger.residual <= tol {
            break;
        }
        let mut pulses = Vec::new();
        let mut applied_phase = vec![0.0; levels];
        for k in 0..levels {
            let err = wrap_phase(targets.phases[k] - phase[k]);
            if err != 0.0 {
                let pulse = model.phase_pulse(k, err, b)?;
                applied_phase[k] = err;
                pulses.push(pulse);
            }
        }
        for pulse in &pulses {
            apply(pulse, &mut phase, &mut loss);
        }
        let excess: Vec<f64> = (0..levels).map(|k| loss[k] - targets.losses[k]).collect();
        let common = excess.iter().copied().fold(f64::MIN, f64::max);
        let mut applied_amp = vec![0.0; levels];
        let mut leveling = Vec::new();
        for k in 0..levels {
            let a = common - excess[k];
            if a > 0.0 {
                applied_amp[k] = a;
                leveling.push(model.amplitude_pulse(k, a)?);
            }
        }
        for pulse in &leveling {
            apply(pulse, &mut phase, &mut loss);
        }
        pulses.extend(leveling);

        let phi_max = applied_phase.iter().fold(0.0_f64, |a, p| a.max(p.abs()));
        let ell_max = applied_amp.iter().copied().fold(0.0, f64::max);
        let initial = ledger.rounds.first().map_or(phi_max + ell_max, |r: &LedgerRound| r.phi_max + r.ell_max);
        let envelope = (2.0 * x).powi(round as i32) * initial;
        bound *= if round == 0 { (-phi_max / b).exp() } else { (-envelope).exp() };
        let common_after = (0..levels).map(|k| loss[k] - targets.losses[k]).fold(f64::MIN, f64::max);
        ledger.rounds.push(LedgerRound {
            round,
            phases: applied_phase,
            amplitudes: applied_amp,
            phi_max,
            ell_max,
            envelope,
            success_bound: bound,
            predicted_success: (-common_after).exp(),
        });
        schedule.rounds.push(pulses);
    }
    ledger.residual = residual(&phase, &loss);
    Ok((schedule, ledger))
}

/// Lower bound on the success probability of the full correction scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessBound {
    /// e^{-phi0/b} e^{-(2x/(1-2x)) (phi0 + l0)}.
    pub limit: f64,
    /// Product of the per-round factors through the ledger's last round.
    pub partial: f64,
}

/// Round 0 costs e^{-phi0/b}; round T >= 1 costs at most e^{-(2x)^T (phi0 + l0)}.
pub fn success_bound(ledger: &CorrectionLedger, b: f64) -> Result<SuccessBound> {
    let two_x = ledger.two_x();
    if two_x >= 1.0 {
        return Err(CarveError::NonConvergent {
            two_x,
            required_c_over_n: required_c_over_n(ledger.n_qubits, b),
        });
    }
    let phi0 = ledger.initial_phi_max();
    let total = ledger.initial_total();
    let limit = (-phi0 / b).exp() * (-(two_x / (1.0 - two_x)) * total).exp();
    Ok(SuccessBound { limit, partial: partial_bound(phi0, total, two_x, b, ledger.rounds.len()) })
}

/// Partial product of the per-round factors over `rounds` rounds.
pub fn partial_bound(phi0: f64, total: f64, two_x: f64, b: f64, rounds: usize) -> f64 {
    if rounds == 0 {
        return 1.0;
    }
    let mut log = -phi0 / b;
    let mut factor = 1.0;
    for _ in 1..rounds {
        factor *= two_x;
        log -= factor * total;
    }
    log.exp()
}
