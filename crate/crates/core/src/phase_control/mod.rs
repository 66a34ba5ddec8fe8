//! Iterative phase and amplitude engineering of Dicke superpositions.
//!
//! A detuned tone imprints a Stark phase on one level at a small amplitude
//! cost; a resonant tone removes amplitude. Both disturb the other levels.
//! The planner applies the targets, then repeatedly negates the accumulated
//! errors and levels the amplitudes, which converges geometrically when the
//! neighbour disturbance factor 2x is below one.

mod ledger;
mod physical;

pub use ledger::{
    iterate_corrections, iterate_corrections_with, partial_bound, success_bound, CorrectionLedger, LedgerRound,
    Schedule, SuccessBound, Targets,
};
pub use physical::{
    realize_tone, verify_schedule_numerically, DisturbanceModel, PhysicalModel, RoundResidual,
    TableModel, VerificationReport,
};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{CarveError, Result};

pub const DEFAULT_B: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    Phase,
    Amplitude,
}

/// One tone applied to a single Dicke level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    #[serde(rename = "m")]
    pub level: usize,
    pub kind: PulseKind,
    /// Phase in rad (signed) for phase pulses, log-population reduction for
    /// amplitude pulses.
    pub magnitude: f64,
    /// Detuning in linewidths; phase pulses only.
    pub b: Option<f64>,
    #[serde(rename = "duration_us")]
    pub duration: f64,
    /// Tone detuning from the level's resonance in rad/us.
    pub offset: f64,
    /// Effective coupling in rad/us.
    pub w: f64,
}

impl PulseSpec {
    /// Log-population reduction of the addressed level itself.
    pub fn own_loss(&self) -> f64 {
        match self.kind {
            PulseKind::Amplitude => self.magnitude,
            PulseKind::Phase => self.magnitude.abs() / self.b.unwrap_or(f64::INFINITY),
        }
    }

    /// Phase of the addressed level itself.
    pub fn own_phase(&self) -> f64 {
        match self.kind {
            PulseKind::Amplitude => 0.0,
            PulseKind::Phase => self.magnitude,
        }
    }
}

fn check_phase(phi: f64) -> Result<()> {
    if !(phi.is_finite() && phi.abs() <= PI * (1.0 + 1e-12)) {
        return Err(CarveError::PhaseOutOfRange(phi));
    }
    Ok(())
}

fn check_b(b: f64) -> Result<()> {
    if !(b.is_finite() && b >= 1.0) {
        return Err(CarveError::BadLinewidthDetuning(b));
    }
    Ok(())
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(CarveError::InvalidParameter { name, value: v, reason: "must be positive" });
    }
    Ok(())
}

/// Stark phase pulse on `level`: the tone sits b linewidths off resonance on
/// the side that gives phase `phi`, for
/// t = |phi| ((kappa_m/2)^2 + delta^2) / (w^2 |delta|).
/// The accompanying loss is exactly |phi| / b.
pub fn stark_pulse(level: usize, phi: f64, b: f64, kappa_m: f64, w: f64) -> Result<PulseSpec> {
    check_phase(phi)?;
    check_b(b)?;
    positive("kappa_m", kappa_m)?;
    positive("w", w)?;
    let offset = if phi < 0.0 { -b * kappa_m } else { b * kappa_m };
    let duration = phi.abs() * (0.25 * kappa_m * kappa_m + offset * offset) / (w * w * offset.abs());
    Ok(PulseSpec { level, kind: PulseKind::Phase, magnitude: phi, b: Some(b), duration, offset, w })
}

/// Resonant amplitude pulse on `level` removing log-population `ell`:
/// t = ell kappa_m / (4 w^2).
pub fn amplitude_pulse(level: usize, ell: f64, kappa_m: f64, w: f64) -> Result<PulseSpec> {
    if !(ell.is_finite() && ell >= 0.0) {
        return Err(CarveError::NegativeAmplitude(ell));
    }
    positive("kappa_m", kappa_m)?;
    positive("w", w)?;
    let duration = ell * kappa_m / (4.0 * w * w);
    Ok(PulseSpec { level, kind: PulseKind::Amplitude, magnitude: ell, b: None, duration, offset: 0.0, w })
}

/// Leading-order disturbance (loss, phase) that `pulse` on level m causes on
/// level k, from the neighbour table:
///
/// | pulse     | loss on k              | phase on k                |
/// |-----------|------------------------|---------------------------|
/// | amplitude | l (N/C) / (k-m)^2      | l sqrt(N/C) / (2 (k-m))   |
/// | phase     | 4 phi b (N/C) / (k-m)^2 | 2 phi b sqrt(N/C) / (k-m) |
pub fn disturbance(pulse: &PulseSpec, k: usize, c: f64, n_qubits: usize, b: f64) -> Result<(f64, f64)> {
    if k == pulse.level {
        return Err(CarveError::SelfDisturbance(k));
    }
    let dist = k as f64 - pulse.level as f64;
    let ratio = n_qubits as f64 / c;
    let root = ratio.sqrt();
    Ok(match pulse.kind {
        PulseKind::Amplitude => {
            let ell = pulse.magnitude;
            (ell * ratio / (dist * dist), ell * root / (2.0 * dist))
        }
        PulseKind::Phase => {
            let phi = pulse.magnitude;
            (4.0 * phi.abs() * b * ratio / (dist * dist), 2.0 * phi * b * root / dist)
        }
    })
}

/// Bound on sum_{k != m} 1/|k - m| over N+1 levels: 2 (1 + ln N).
pub fn harmonic_constant(n_qubits: usize) -> f64 {
    2.0 * (1.0 + (n_qubits.max(1) as f64).ln())
}

/// Bound on sum_{k != m} 1/(k - m)^2: pi^2 / 3.
pub fn square_constant() -> f64 {
    PI * PI / 3.0
}

/// Per-round contraction factor
/// x = max{ sqrt(N/C) A (2b + 1/(2b)), (N/C) B (4b + 1/b) }.
pub fn convergence_factor(c: f64, n_qubits: usize, b: f64) -> f64 {
    let ratio = n_qubits as f64 / c;
    let first = ratio.sqrt() * harmonic_constant(n_qubits) * (2.0 * b + 1.0 / (2.0 * b));
    let second = ratio * square_constant() * (4.0 * b + 1.0 / b);
    first.max(second)
}

/// Smallest C/N for which 2x < 1.
pub fn required_c_over_n(n_qubits: usize, b: f64) -> f64 {
    let first = harmonic_constant(n_qubits) * (2.0 * b + 1.0 / (2.0 * b));
    let second = square_constant() * (4.0 * b + 1.0 / b);
    (2.0 * first).powi(2).max(2.0 * second)
}

/// Wraps a phase into (-pi, pi].
pub fn wrap_phase(phi: f64) -> f64 {
    let mut p = phi.rem_euclid(2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stark_loss_ratio_is_exact() {
        for (phi, b) in [(0.3, 1.0), (-2.0, 3.0), (PI, 5.5)] {
            let p = stark_pulse(2, phi, b, 1.3, 0.026).unwrap();
            let detuning = p.offset;
            let k = 1.3;
            let denom = 0.25 * k * k + detuning * detuning;
            let phase = p.w * p.w * detuning * p.duration / denom;
            let loss = p.w * p.w * k * p.duration / denom;
            assert!((phase - phi).abs() < 1e-12);
            assert!((loss / phase.abs() - k / detuning.abs()).abs() < 1e-12);
            assert!((loss - p.own_loss()).abs() < 1e-12);
        }
        // Worst case success factor.
        let p = stark_pulse(0, PI, 3.0, 1.0, 0.02).unwrap();
        assert!(((-p.own_loss()).exp() - (-PI / 3.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn stark_edges() {
        assert_eq!(stark_pulse(1, 0.0, 3.0, 1.0, 0.02).unwrap().duration, 0.0);
        assert!(matches!(stark_pulse(1, 3.2, 3.0, 1.0, 0.02), Err(CarveError::PhaseOutOfRange(_))));
        assert!(matches!(stark_pulse(1, 1.0, 0.5, 1.0, 0.02), Err(CarveError::BadLinewidthDetuning(_))));
        assert!(amplitude_pulse(1, -0.1, 1.0, 0.02).is_err());
    }

    #[test]
    fn table_entries_unit_distance() {
        let (c, n, b) = (400.0, 4, 3.0);
        let r = n as f64 / c;
        let amp = amplitude_pulse(2, 0.7, 1.0, 0.02).unwrap();
        let ph = stark_pulse(2, 0.9, b, 1.0, 0.02).unwrap();
        for (k, s) in [(3usize, 1.0), (1, -1.0)] {
            let (l, p) = disturbance(&amp, k, c, n, b).unwrap();
            assert_eq!(l, 0.7 * r);
            assert_eq!(p, s * 0.7 * r.sqrt() / 2.0);
            let (l, p) = disturbance(&ph, k, c, n, b).unwrap();
            assert_eq!(l, 4.0 * 0.9 * b * r);
            assert_eq!(p, s * 2.0 * 0.9 * b * r.sqrt());
        }
        assert!(matches!(disturbance(&amp, 2, c, n, b), Err(CarveError::SelfDisturbance(2))));
    }

    #[test]
    fn table_scaling() {
        let ph = stark_pulse(0, 1.0, 3.0, 1.0, 0.02).unwrap();
        let (_, p1) = disturbance(&ph, 1, 1e3, 8, 3.0).unwrap();
        let (_, p2) = disturbance(&ph, 2, 1e3, 8, 3.0).unwrap();
        assert!((p1 / p2 - 2.0).abs() < 1e-15);
        let (l, p) = disturbance(&ph, 1, 1e30, 8, 3.0).unwrap();
        assert!(l < 1e-28 && p < 1e-13);
    }

    #[test]
    fn convergence_factor_example() {
        let x = convergence_factor(1e5, 8, 3.0);
        assert!((harmonic_constant(8) - 6.159).abs() < 1e-3);
        assert!((x - 0.3397).abs() < 1e-4, "{x}");
        assert!((2.0 * x - 0.679).abs() < 1e-3);
        let second = 8e-5 * square_constant() * (12.0 + 1.0 / 3.0);
        assert!((second - 0.0032).abs() < 1e-4);
        let req = required_c_over_n(8, 3.0);
        assert!((2.0 * convergence_factor(req * 8.0, 8, 3.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wrap_range() {
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(-0.5) + 0.5).abs() < 1e-15);
        assert!((wrap_phase(2.0 * PI + 0.1) - 0.1).abs() < 1e-12);
    }
}
