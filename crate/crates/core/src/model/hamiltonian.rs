use num_complex::Complex64;

use super::{DriveTone, PhysicalParams};
use crate::operator::SparseOperator;
use crate::state_space::JointBasis;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Ensemble-cavity Hamiltonian: -Delta on every one-photon state and
/// g sqrt(m) exchange between (up, 1, m) and (up, 0, m_e).
pub fn build_h_target(params: &PhysicalParams, basis: &JointBasis) -> SparseOperator {
    let n = basis.n_qubits();
    let mut h = SparseOperator::zeros(basis.dim());
    for m in 0..=n {
        let u = basis.photon(m);
        h.add(u, u, re(-params.delta_cap()));
        if m >= 1 {
            h.add_hermitian_pair(basis.ensemble_excited(m), u, re(params.g() * (m as f64).sqrt()));
        }
    }
    h
}

/// Source-atom Hamiltonian for one tone: -(Delta + delta) on the down block,
/// Omega between (down, 0, m) and (e, 0, m), and g between (e, 0, m) and (up, 1, m).
pub fn build_h_source(params: &PhysicalParams, tone: &DriveTone, basis: &JointBasis) -> SparseOperator {
    let n = basis.n_qubits();
    let mut h = SparseOperator::zeros(basis.dim());
    for m in 0..=n {
        let d = basis.down(m);
        let e = basis.source_excited(m);
        h.add(d, d, re(-(params.delta_cap() + tone.delta)));
        h.add_hermitian_pair(e, d, re(tone.omega));
        h.add_hermitian_pair(basis.photon(m), e, re(params.g()));
    }
    h
}

pub fn build_h_total(params: &PhysicalParams, tone: &DriveTone, basis: &JointBasis) -> SparseOperator {
    build_h_target(params, basis).sum(&build_h_source(params, tone, basis))
}

/// A decay |target><source| at `rate`; every channel here ends in LOST.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpOperator {
    pub source: usize,
    pub target: usize,
    pub rate: f64,
}

impl JumpOperator {
    pub fn amplitude(&self) -> f64 {
        self.rate.sqrt()
    }

    pub fn to_operator(&self, dim: usize) -> SparseOperator {
        let mut op = SparseOperator::zeros(dim);
        op.add(self.target, self.source, re(self.amplitude()));
        op
    }
}

/// Cavity decay from every one-photon state, source-atom decay from every
/// (e, 0, m) and ensemble decay from every (up, 0, m_e), all into LOST.
pub fn collapse_channels(params: &PhysicalParams, basis: &JointBasis) -> Vec<JumpOperator> {
    let n = basis.n_qubits();
    let lost = basis.lost();
    let mut out = Vec::with_capacity(3 * n + 2);
    let mut push = |source: usize, rate: f64| {
        if rate > 0.0 {
            out.push(JumpOperator { source, target: lost, rate });
        }
    };
    for m in 0..=n {
        push(basis.photon(m), params.kappa());
    }
    for m in 0..=n {
        push(basis.source_excited(m), params.gamma_e());
    }
    for m in 1..=n {
        push(basis.ensemble_excited(m), params.gamma_e());
    }
    out
}

/// Diagonal of sum_k L_k^dag L_k, i.e. the total decay rate out of each basis state.
pub fn dissipator_diagonal(channels: &[JumpOperator], dim: usize) -> Vec<f64> {
    let mut diag = vec![0.0; dim];
    for ch in channels {
        diag[ch.source] += ch.rate;
    }
    diag
}
