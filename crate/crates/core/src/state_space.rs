//! Joint single-excitation space of source atom, cavity mode and Dicke ensemble.
//!
//! Basis ordering is fixed so serialized states are portable:
//!
//! ```text
//! [ (down, 0, m)  m = 0..=N ]   source in its ground state, cavity empty
//! [ (e,    0, m)  m = 0..=N ]   source excited
//! [ (up,   1, m)  m = 0..=N ]   photon in the cavity
//! [ (up,   0, m_e) m = 1..=N ]  photon absorbed collectively by the ensemble
//! [ LOST ]                      any decay; absorbing
//! ```
//!
//! The dimension is therefore 4N + 4.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CarveError, Result};
use crate::operator::SparseOperator;

const HERMITIAN_TOL: f64 = 1e-12;
const PSD_TOL: f64 = -1e-10;

/// One basis label of the joint space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    /// |down>_s |0>_c |m>
    Down { m: usize },
    /// |e>_s |0>_c |m>
    SourceExcited { m: usize },
    /// |up>_s |1>_c |m>
    Photon { m: usize },
    /// |up>_s |0>_c |m_e>, m >= 1
    EnsembleExcited { m: usize },
    Lost,
}

impl Label {
    pub fn dicke_level(&self) -> Option<usize> {
        match *self {
            Label::Down { m }
            | Label::SourceExcited { m }
            | Label::Photon { m }
            | Label::EnsembleExcited { m } => Some(m),
            Label::Lost => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Down { m } => write!(f, "|down,0,{m}>"),
            Label::SourceExcited { m } => write!(f, "|e,0,{m}>"),
            Label::Photon { m } => write!(f, "|up,1,{m}>"),
            Label::EnsembleExcited { m } => write!(f, "|up,0,{m}_e>"),
            Label::Lost => write!(f, "|LOST>"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointBasis {
    n_qubits: usize,
    states: Vec<Label>,
}

/// Builds the joint basis for an ensemble of `n_qubits`.
pub fn build_basis(n_qubits: usize) -> Result<JointBasis> {
    if n_qubits == 0 {
        return Err(CarveError::NoQubits);
    }
    let n = n_qubits;
    let mut states = Vec::with_capacity(4 * n + 4);
    states.extend((0..=n).map(|m| Label::Down { m }));
    states.extend((0..=n).map(|m| Label::SourceExcited { m }));
    states.extend((0..=n).map(|m| Label::Photon { m }));
    states.extend((1..=n).map(|m| Label::EnsembleExcited { m }));
    states.push(Label::Lost);
    Ok(JointBasis { n_qubits, states })
}

impl JointBasis {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn labels(&self) -> &[Label] {
        &self.states
    }

    pub fn label(&self, index: usize) -> Label {
        self.states[index]
    }

    /// Position of `label`, or `None` if it does not belong to this basis.
    pub fn index(&self, label: Label) -> Option<usize> {
        let n = self.n_qubits;
        let block = n + 1;
        match label {
            Label::Down { m } if m <= n => Some(m),
            Label::SourceExcited { m } if m <= n => Some(block + m),
            Label::Photon { m } if m <= n => Some(2 * block + m),
            Label::EnsembleExcited { m } if (1..=n).contains(&m) => Some(3 * block + m - 1),
            Label::Lost => Some(4 * n + 3),
            _ => None,
        }
    }

    pub fn down(&self, m: usize) -> usize {
        self.index(Label::Down { m }).expect("level in range")
    }

    pub fn source_excited(&self, m: usize) -> usize {
        self.index(Label::SourceExcited { m }).expect("level in range")
    }

    pub fn photon(&self, m: usize) -> usize {
        self.index(Label::Photon { m }).expect("level in range")
    }

    pub fn ensemble_excited(&self, m: usize) -> usize {
        self.index(Label::EnsembleExcited { m }).expect("level in range")
    }

    pub fn lost(&self) -> usize {
        4 * self.n_qubits + 3
    }

    /// Index range of the (down, 0, m) block.
    pub fn down_block(&self) -> std::ops::Range<usize> {
        0..self.n_qubits + 1
    }

    pub fn check_qubits(&self, n_qubits: usize) -> Result<()> {
        if self.n_qubits != n_qubits {
            return Err(CarveError::BasisMismatch { expected: n_qubits, got: self.n_qubits });
        }
        Ok(())
    }

    pub fn check_level(&self, m: usize) -> Result<()> {
        if m > self.n_qubits {
            return Err(CarveError::LevelOutOfRange { m, n_qubits: self.n_qubits });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Pure,
    Density,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateData {
    Pure(DVector<Complex64>),
    Density(DMatrix<Complex64>),
}

/// A pure or mixed state on the joint space.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    basis: Arc<JointBasis>,
    data: StateData,
}

impl JointState {
    pub fn pure(basis: Arc<JointBasis>, amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(CarveError::InvalidState {
                kind: "pure state",
                reason: format!("length {} != basis dimension {}", amplitudes.len(), basis.dim()),
            });
        }
        Ok(Self { basis, data: StateData::Pure(amplitudes) })
    }

    /// Validated density matrix: Hermitian within 1e-12 and PSD within -1e-10.
    pub fn density(basis: Arc<JointBasis>, rho: DMatrix<Complex64>) -> Result<Self> {
        let dim = basis.dim();
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(CarveError::InvalidState {
                kind: "density matrix",
                reason: format!("shape {}x{} != basis dimension {dim}", rho.nrows(), rho.ncols()),
            });
        }
        let dev = hermiticity_deviation(&rho);
        if dev > HERMITIAN_TOL {
            return Err(CarveError::InvalidState {
                kind: "density matrix",
                reason: format!("not Hermitian (max deviation {dev:e})"),
            });
        }
        let min_eig = min_eigenvalue(&rho);
        if min_eig < PSD_TOL {
            return Err(CarveError::InvalidState {
                kind: "density matrix",
                reason: format!("not positive semidefinite (min eigenvalue {min_eig:e})"),
            });
        }
        Ok(Self { basis, data: StateData::Density(rho) })
    }

    /// Wraps propagator output without re-validating it.
    pub(crate) fn from_parts(basis: Arc<JointBasis>, data: StateData) -> Self {
        Self { basis, data }
    }

    pub fn basis(&self) -> &Arc<JointBasis> {
        &self.basis
    }

    pub fn n_qubits(&self) -> usize {
        self.basis.n_qubits()
    }

    pub fn kind(&self) -> StateKind {
        match self.data {
            StateData::Pure(_) => StateKind::Pure,
            StateData::Density(_) => StateKind::Density,
        }
    }

    pub fn data(&self) -> &StateData {
        &self.data
    }

    pub fn as_pure(&self) -> Option<&DVector<Complex64>> {
        match &self.data {
            StateData::Pure(v) => Some(v),
            StateData::Density(_) => None,
        }
    }

    pub fn as_density(&self) -> Option<&DMatrix<Complex64>> {
        match &self.data {
            StateData::Density(m) => Some(m),
            StateData::Pure(_) => None,
        }
    }

    /// Density-matrix view; pure states are expanded as |psi><psi|.
    pub fn to_density(&self) -> DMatrix<Complex64> {
        match &self.data {
            StateData::Pure(v) => v * v.adjoint(),
            StateData::Density(m) => m.clone(),
        }
    }

    /// Population of basis index `i`.
    pub fn population(&self, i: usize) -> f64 {
        match &self.data {
            StateData::Pure(v) => v[i].norm_sqr(),
            StateData::Density(m) => m[(i, i)].re,
        }
    }

    /// Squared norm (pure) or trace (density).
    pub fn norm_or_trace(&self) -> f64 {
        match &self.data {
            StateData::Pure(v) => v.norm_squared(),
            StateData::Density(m) => m.trace().re,
        }
    }

    /// Total weight in the (down, 0, m) block.
    pub fn down_weight(&self) -> f64 {
        self.basis.down_block().map(|i| self.population(i)).sum()
    }

    pub fn lost_weight(&self) -> f64 {
        self.population(self.basis.lost())
    }

    /// Weight outside the down block and LOST: the transiently excited sector.
    pub fn excited_weight(&self) -> f64 {
        self.norm_or_trace() - self.down_weight() - self.lost_weight()
    }

    /// Expectation <A> = Tr(rho A) (unnormalized).
    pub fn expectation(&self, op: &SparseOperator) -> Complex64 {
        match &self.data {
            StateData::Pure(v) => op.expectation(v),
            StateData::Density(m) => op.iter().map(|(r, c, a)| a * m[(c, r)]).sum(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&StateFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: StateFile = serde_json::from_str(text)?;
        file.into_state()
    }
}

/// On-disk layout: `{ "n_qubits": N, "kind": "pure"|"density", "amplitudes": [[re, im], ...] }`.
/// Density matrices are flattened row-major.
#[derive(Debug, Serialize, Deserialize)]
struct StateFile {
    n_qubits: usize,
    kind: StateKind,
    amplitudes: Vec<[f64; 2]>,
}

impl From<&JointState> for StateFile {
    fn from(state: &JointState) -> Self {
        let amplitudes = match &state.data {
            StateData::Pure(v) => v.iter().map(|z| [z.re, z.im]).collect(),
            StateData::Density(m) => {
                let n = m.nrows();
                (0..n)
                    .flat_map(|r| (0..n).map(move |c| (r, c)))
                    .map(|(r, c)| [m[(r, c)].re, m[(r, c)].im])
                    .collect()
            }
        };
        StateFile { n_qubits: state.n_qubits(), kind: state.kind(), amplitudes }
    }
}

impl StateFile {
    fn into_state(self) -> Result<JointState> {
        let basis = Arc::new(build_basis(self.n_qubits)?);
        let values: Vec<Complex64> =
            self.amplitudes.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        match self.kind {
            StateKind::Pure => JointState::pure(basis, DVector::from_vec(values)),
            StateKind::Density => {
                let dim = basis.dim();
                if values.len() != dim * dim {
                    return Err(CarveError::InvalidState {
                        kind: "density matrix",
                        reason: format!("{} entries for dimension {dim}", values.len()),
                    });
                }
                JointState::density(basis, DMatrix::from_row_slice(dim, dim, &values))
            }
        }
    }
}

/// Reduced state of the ensemble over Dicke levels m = 0..=N.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    n_qubits: usize,
    data: StateData,
}

impl EnsembleState {
    pub fn pure(amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(CarveError::NoQubits);
        }
        Ok(Self { n_qubits: amplitudes.len() - 1, data: StateData::Pure(amplitudes) })
    }

    pub fn density(rho: DMatrix<Complex64>) -> Result<Self> {
        if rho.nrows() != rho.ncols() || rho.nrows() == 0 {
            return Err(CarveError::InvalidState {
                kind: "ensemble density",
                reason: format!("shape {}x{}", rho.nrows(), rho.ncols()),
            });
        }
        Ok(Self { n_qubits: rho.nrows() - 1, data: StateData::Density(rho) })
    }

    /// Dicke-basis amplitudes of |+>^N.
    pub fn css(n_qubits: usize) -> Self {
        let amps = css_amplitudes(n_qubits).into_iter().map(|a| Complex64::new(a, 0.0));
        Self { n_qubits, data: StateData::Pure(DVector::from_iterator(n_qubits + 1, amps)) }
    }

    /// The Dicke state |m>.
    pub fn dicke(n_qubits: usize, m: usize) -> Result<Self> {
        if m > n_qubits {
            return Err(CarveError::LevelOutOfRange { m, n_qubits });
        }
        let mut v = DVector::zeros(n_qubits + 1);
        v[m] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, data: StateData::Pure(v) })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn kind(&self) -> StateKind {
        match self.data {
            StateData::Pure(_) => StateKind::Pure,
            StateData::Density(_) => StateKind::Density,
        }
    }

    pub fn data(&self) -> &StateData {
        &self.data
    }

    pub fn to_density(&self) -> DMatrix<Complex64> {
        match &self.data {
            StateData::Pure(v) => v * v.adjoint(),
            StateData::Density(m) => m.clone(),
        }
    }

    pub fn trace(&self) -> f64 {
        match &self.data {
            StateData::Pure(v) => v.norm_squared(),
            StateData::Density(m) => m.trace().re,
        }
    }

    pub fn population(&self, m: usize) -> f64 {
        match &self.data {
            StateData::Pure(v) => v[m].norm_sqr(),
            StateData::Density(rho) => rho[(m, m)].re,
        }
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..=self.n_qubits).map(|m| self.population(m)).collect()
    }

    /// Rescales to unit trace; fails on an all-zero state.
    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if tr <= 0.0 || !tr.is_finite() {
            return Err(CarveError::CarveAnnihilated);
        }
        let data = match &self.data {
            StateData::Pure(v) => StateData::Pure(v.unscale(tr.sqrt())),
            StateData::Density(m) => StateData::Density(m.unscale(tr)),
        };
        Ok(Self { n_qubits: self.n_qubits, data })
    }

    /// <target|rho|target> for a pure ensemble target (target need not be normalized).
    pub fn overlap_with(&self, target: &DVector<Complex64>) -> f64 {
        let t = target.normalize();
        match &self.data {
            StateData::Pure(v) => t.dotc(v).norm_sqr(),
            StateData::Density(m) => (t.adjoint() * m * &t)[(0, 0)].re,
        }
    }

    /// 1 - <m|rho|m> on the normalized state.
    pub fn infidelity_to_level(&self, m: usize) -> Result<f64> {
        if m > self.n_qubits {
            return Err(CarveError::LevelOutOfRange { m, n_qubits: self.n_qubits });
        }
        let norm = self.normalized()?;
        Ok((1.0 - norm.population(m)).clamp(0.0, 1.0))
    }

    /// Relative phase arg(rho[m, reference]) of each level against `reference`.
    pub fn relative_phases(&self, reference: usize) -> Vec<f64> {
        let rho = self.to_density();
        (0..=self.n_qubits).map(|m| rho[(m, reference)].arg()).collect()
    }
}

/// sqrt(binom(N, m) / 2^N) for m = 0..=N.
pub fn css_amplitudes(n_qubits: usize) -> Vec<f64> {
    css_weights(n_qubits).into_iter().map(f64::sqrt).collect()
}

/// Binomial weights binom(N, m) / 2^N.
pub fn css_weights(n_qubits: usize) -> Vec<f64> {
    let n = n_qubits;
    let mut weights = Vec::with_capacity(n + 1);
    // binom(N, m) 2^-N via a running product keeps everything in range for large N.
    let mut w = 0.5f64.powi(n as i32);
    for m in 0..=n {
        weights.push(w);
        w *= (n - m) as f64 / (m + 1) as f64;
    }
    weights
}

/// |down>_s |0>_c |+>^N on the joint basis.
pub fn css_state(n_qubits: usize, basis: &Arc<JointBasis>) -> Result<JointState> {
    basis.check_qubits(n_qubits)?;
    let ensemble = EnsembleState::css(n_qubits);
    embed_down(&ensemble, basis)
}

/// Places an ensemble state in the (down, 0) block of the joint space.
pub fn embed_down(ensemble: &EnsembleState, basis: &Arc<JointBasis>) -> Result<JointState> {
    basis.check_qubits(ensemble.n_qubits())?;
    let dim = basis.dim();
    let data = match ensemble.data() {
        StateData::Pure(v) => {
            let mut psi = DVector::zeros(dim);
            for (m, a) in v.iter().enumerate() {
                psi[basis.down(m)] = *a;
            }
            StateData::Pure(psi)
        }
        StateData::Density(r) => {
            let mut rho = DMatrix::zeros(dim, dim);
            for m in 0..r.nrows() {
                for k in 0..r.ncols() {
                    rho[(basis.down(m), basis.down(k))] = r[(m, k)];
                }
            }
            StateData::Density(rho)
        }
    };
    Ok(JointState::from_parts(basis.clone(), data))
}

/// Rank-1 projector onto (down, 0, m).
pub fn dicke_projector(m: usize, basis: &JointBasis) -> Result<SparseOperator> {
    basis.check_level(m)?;
    let mut p = SparseOperator::zeros(basis.dim());
    let i = basis.down(m);
    p.add(i, i, Complex64::new(1.0, 0.0));
    Ok(p)
}

/// |m><m| on the (N+1)-dimensional Dicke space.
pub fn ensemble_projector(m: usize, n_qubits: usize) -> Result<DMatrix<Complex64>> {
    if m > n_qubits {
        return Err(CarveError::LevelOutOfRange { m, n_qubits });
    }
    let mut p = DMatrix::zeros(n_qubits + 1, n_qubits + 1);
    p[(m, m)] = Complex64::new(1.0, 0.0);
    Ok(p)
}

pub fn hermiticity_deviation(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for r in 0..n {
        for c in r..n {
            dev = dev.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    dev
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    let herm = (m + m.adjoint()).unscale(2.0);
    herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(n: usize) -> Arc<JointBasis> {
        Arc::new(build_basis(n).unwrap())
    }

    #[test]
    fn dimensions_match_examples() {
        assert_eq!(build_basis(1).unwrap().dim(), 8);
        assert_eq!(build_basis(4).unwrap().dim(), 20);
        assert_eq!(build_basis(8).unwrap().dim(), 36);
    }

    #[test]
    fn zero_qubits_rejected() {
        assert!(matches!(build_basis(0), Err(CarveError::NoQubits)));
    }

    #[test]
    fn dimension_formula_and_round_trip_exhaustive() {
        for n in 1..=32 {
            let b = build_basis(n).unwrap();
            assert_eq!(b.dim(), 4 * n + 4);
            for (i, &label) in b.labels().iter().enumerate() {
                assert_eq!(b.index(label), Some(i), "{label} at {i}");
            }
            assert_eq!(b.index(Label::EnsembleExcited { m: 0 }), None);
            assert_eq!(b.index(Label::Down { m: n + 1 }), None);
        }
    }

    #[test]
    fn ordering_is_blockwise() {
        let b = build_basis(2).unwrap();
        let expected = [
            Label::Down { m: 0 },
            Label::Down { m: 1 },
            Label::Down { m: 2 },
            Label::SourceExcited { m: 0 },
            Label::SourceExcited { m: 1 },
            Label::SourceExcited { m: 2 },
            Label::Photon { m: 0 },
            Label::Photon { m: 1 },
            Label::Photon { m: 2 },
            Label::EnsembleExcited { m: 1 },
            Label::EnsembleExcited { m: 2 },
            Label::Lost,
        ];
        assert_eq!(b.labels(), &expected);
    }

    #[test]
    fn css_populations() {
        let b = basis(4);
        let s = css_state(4, &b).unwrap();
        assert!((s.population(b.down(2)) - 0.375).abs() < 1e-15);
        let total: f64 = (0..=4).map(|m| s.population(b.down(m))).sum();
        assert!((total - 1.0).abs() < 1e-15);

        let b8 = basis(8);
        let s8 = css_state(8, &b8).unwrap();
        let p4 = s8.population(b8.down(4));
        assert!((p4 - 70.0 / 256.0).abs() < 1e-15);
        // Same order of magnitude as 1/sqrt(N).
        assert!(p4 > 0.5 / 8f64.sqrt() && p4 < 2.0 / 8f64.sqrt());
    }

    #[test]
    fn css_norm_up_to_32() {
        for n in 1..=32 {
            let s = css_state(n, &basis(n)).unwrap();
            assert!((s.norm_or_trace() - 1.0).abs() < 1e-12, "N = {n}");
        }
    }

    #[test]
    fn css_rejects_mismatched_basis() {
        assert!(matches!(css_state(3, &basis(4)), Err(CarveError::BasisMismatch { .. })));
    }

    #[test]
    fn projector_properties() {
        let b = basis(4);
        let s = css_state(4, &b).unwrap();
        let p = dicke_projector(2, &b).unwrap();
        let once = p.apply(s.as_pure().unwrap());
        assert!((once.norm_squared() - 0.375).abs() < 1e-15);
        let twice = p.apply(&once);
        assert_eq!(once, twice);

        let mut only_top = DVector::zeros(b.dim());
        only_top[b.down(4)] = Complex64::new(1.0, 0.0);
        let p0 = dicke_projector(0, &b).unwrap();
        assert_eq!(p0.apply(&only_top).norm_squared(), 0.0);

        assert!(matches!(dicke_projector(5, &b), Err(CarveError::LevelOutOfRange { .. })));
    }

    #[test]
    fn density_validation() {
        let b = basis(1);
        let mut rho = DMatrix::zeros(8, 8);
        rho[(0, 0)] = Complex64::new(0.5, 0.0);
        rho[(1, 1)] = Complex64::new(0.5, 0.0);
        rho[(0, 1)] = Complex64::new(0.0, 0.5);
        rho[(1, 0)] = Complex64::new(0.0, -0.5);
        assert!(JointState::density(b.clone(), rho.clone()).is_ok());

        let mut bad = rho.clone();
        bad[(1, 0)] = Complex64::new(0.0, 0.5);
        assert!(JointState::density(b.clone(), bad).is_err());

        let mut neg = rho;
        neg[(0, 1)] = Complex64::new(0.0, 0.9);
        neg[(1, 0)] = Complex64::new(0.0, -0.9);
        assert!(JointState::density(b, neg).is_err());
    }

    #[test]
    fn json_layout() {
        let b = basis(1);
        let s = css_state(1, &b).unwrap();
        let text = s.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["n_qubits"], 1);
        assert_eq!(v["kind"], "pure");
        assert_eq!(v["amplitudes"].as_array().unwrap().len(), 8);
        assert_eq!(JointState::from_json(&text).unwrap(), s);

        let d = JointState::from_parts(b, StateData::Density(s.to_density()));
        let back = JointState::from_json(&d.to_json().unwrap()).unwrap();
        assert_eq!(back.kind(), StateKind::Density);
        assert!((back.to_density() - d.to_density()).norm() < 1e-15);
    }

    #[test]
    fn ensemble_infidelity() {
        let e = EnsembleState::css(4);
        let eps = e.infidelity_to_level(2).unwrap();
        assert!((eps - 0.625).abs() < 1e-15);
        assert!(e.infidelity_to_level(7).is_err());
    }
}
