use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::evolve::EvolutionResult;
use crate::error::{CarveError, Result};
use crate::state_space::{EnsembleState, JointState, StateData};

/// Heralded ensemble state after post-selecting on the source atom staying down.
#[derive(Debug, Clone, PartialEq)]
pub struct CarveOutcome {
    /// Normalized conditional ensemble state.
    pub ensemble: EnsembleState,
    /// Weight of the down block before renormalization.
    pub success_probability: f64,
    /// 1 - fidelity to the target, once one is set.
    pub infidelity: Option<f64>,
}

impl CarveOutcome {
    pub fn with_target_level(mut self, m: usize) -> Result<Self> {
        self.infidelity = Some(self.ensemble.infidelity_to_level(m)?);
        Ok(self)
    }

    /// Infidelity to a pure target given by Dicke amplitudes (normalized internally).
    pub fn with_target_state(mut self, target: &DVector<Complex64>) -> Result<Self> {
        if target.len() != self.ensemble.n_qubits() + 1 {
            return Err(CarveError::BasisMismatch {
                expected: self.ensemble.n_qubits(),
                got: target.len().saturating_sub(1),
            });
        }
        let f = self.ensemble.overlap_with(target);
        self.infidelity = Some((1.0 - f).clamp(0.0, 1.0));
        Ok(self)
    }
}

/// Projects onto the (down, 0) block and renormalizes.
pub fn postselect_source_down(state: &JointState) -> Result<CarveOutcome> {
    let basis = state.basis();
    let n = basis.n_qubits();
    let block = match state.data() {
        StateData::Pure(v) => {
            let down = v.rows(0, n + 1).into_owned();
            return outcome_from(EnsembleState::pure(down)?);
        }
        StateData::Density(rho) => rho.view((0, 0), (n + 1, n + 1)).into_owned(),
    };
    postselect_block(&block)
}

/// Post-selection from an unnormalized down-block density.
pub fn postselect_block(block: &DMatrix<Complex64>) -> Result<CarveOutcome> {
    outcome_from(EnsembleState::density(block.clone())?)
}

fn outcome_from(raw: EnsembleState) -> Result<CarveOutcome> {
    let success_probability = raw.trace();
    if success_probability.is_nan() || success_probability <= 1e-300 {
        return Err(CarveError::CarveAnnihilated);
    }
    Ok(CarveOutcome { ensemble: raw.normalized()?, success_probability, infidelity: None })
}

/// Reduced ensemble density over Dicke levels m = 0..=N.
///
/// Sums the down, source-excited and photon sectors, which all carry the
/// ensemble in |m>. Weight in (up, 0, m_e) and LOST has no Dicke label and is
/// left out; see [`non_dicke_weight`].
pub fn trace_out_probe(state: &JointState) -> EnsembleState {
    let basis = state.basis();
    let n = basis.n_qubits();
    let sectors: [Box<dyn Fn(usize) -> usize>; 3] = [
        Box::new(|m| basis.down(m)),
        Box::new(|m| basis.source_excited(m)),
        Box::new(|m| basis.photon(m)),
    ];
    let rho = match state.data() {
        StateData::Pure(v) => DMatrix::from_fn(n + 1, n + 1, |m, k| {
            sectors.iter().map(|s| v[s(m)] * v[s(k)].conj()).sum()
        }),
        StateData::Density(r) => {
            DMatrix::from_fn(n + 1, n + 1, |m, k| sectors.iter().map(|s| r[(s(m), s(k))]).sum())
        }
    };
    EnsembleState::density(rho).expect("square matrix of size N+1")
}

/// Weight outside the Dicke-labelled sectors: ensemble-excited states plus LOST.
pub fn non_dicke_weight(state: &JointState) -> f64 {
    let b = state.basis();
    (1..=b.n_qubits()).map(|m| state.population(b.ensemble_excited(m))).sum::<f64>() + state.lost_weight()
}

fn crossing(times: &[f64], series: &[f64], threshold: f64) -> Result<f64> {
    let t_max = times.last().copied().unwrap_or(0.0);
    let i = series
        .iter()
        .position(|&s| s <= threshold)
        .ok_or(CarveError::NoCrossing { threshold, t_max })?;
    if i == 0 {
        return Ok(times[0]);
    }
    let (s0, s1) = (series[i - 1], series[i]);
    let (t0, t1) = (times[i - 1], times[i]);
    Ok(t0 + (t1 - t0) * (s0 - threshold) / (s0 - s1))
}

/// Time at which the total down-block weight falls to `reference / e`.
///
/// With `reference` set to the kept level's initial weight, the heralded
/// success probability at this time is about that weight over e.
pub fn find_t_1e(result: &EvolutionResult, reference: f64) -> Result<f64> {
    crossing(&result.times, &result.survival, reference / std::f64::consts::E)
}

/// Time at which level m's own population falls to 1/e of its initial value.
pub fn find_t_1e_level(result: &EvolutionResult, m: usize) -> Result<f64> {
    if m > result.n_qubits {
        return Err(CarveError::LevelOutOfRange { m, n_qubits: result.n_qubits });
    }
    let series = result.level_series(m);
    crossing(&result.times, &series, series[0] / std::f64::consts::E)
}

/// Ideal echo pulse: swaps (down, 0, m) with (down, 0, N-m).
pub fn spin_flip(state: &JointState) -> JointState {
    let n = state.n_qubits();
    let perm = |i: usize| if i <= n { n - i } else { i };
    let data = match state.data() {
        StateData::Pure(v) => StateData::Pure(DVector::from_fn(v.len(), |i, _| v[perm(i)])),
        StateData::Density(r) => StateData::Density(DMatrix::from_fn(r.nrows(), r.ncols(), |i, j| r[(perm(i), perm(j))])),
    };
    JointState::from_parts(state.basis().clone(), data)
}
