//! Per-level linewidths and tone-induced decay and Stark rates.
//!
//! Three rate laws are available. `Dispersive` is the closed-form Lorentzian
//! centred on (m+1)d with width kappa_m. `Dressed` keeps the Lorentzian shape
//! but takes centre, width and coupling from the exact one-photon eigenvalue
//! of each level. `Resolvent` evaluates the exact weak-drive self-energy and
//! also captures direct scattering through the source atom's excited state.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DriveTone, PhysicalParams};
use crate::error::{CarveError, Result};
use crate::operator::SparseOperator;

/// Counting convention for the atomic part of the dressed linewidth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaConvention {
    /// kappa + (m+1) (g/Delta)^2 gamma_e: the source atom's own excitation is counted.
    #[default]
    PlusOne,
    /// kappa + m (g/Delta)^2 gamma_e.
    EnsembleOnly,
}

pub fn kappa_m_with(params: &PhysicalParams, m: usize, convention: KappaConvention) -> f64 {
    let count = match convention {
        KappaConvention::PlusOne => m + 1,
        KappaConvention::EnsembleOnly => m,
    };
    params.kappa() + count as f64 * params.atomic_width()
}

/// Dressed linewidth of the one-photon state attached to level m.
pub fn kappa_m(params: &PhysicalParams, m: usize) -> f64 {
    kappa_m_with(params, m, KappaConvention::PlusOne)
}

fn lorentzian(w2: f64, width: f64, detuning: f64) -> (f64, f64) {
    let denom = 0.25 * width * width + detuning * detuning;
    (w2 * width / denom, w2 * detuning / denom)
}

/// Decay rate of level m under one tone: w^2 kappa_m / ((kappa_m/2)^2 + (delta - (m+1)d)^2).
pub fn gamma_m(params: &PhysicalParams, tone: &DriveTone, m: usize) -> f64 {
    let w = tone.w(params);
    let detuning = tone.delta - (m + 1) as f64 * params.dispersive_shift();
    lorentzian(w * w, kappa_m(params, m), detuning).0
}

/// Stark phase accumulated per unit time by level m under one tone (dispersive law).
pub fn stark_rate(params: &PhysicalParams, tone: &DriveTone, m: usize) -> f64 {
    let w = tone.w(params);
    let detuning = tone.delta - (m + 1) as f64 * params.dispersive_shift();
    lorentzian(w * w, kappa_m(params, m), detuning).1
}

/// Detuning that balances cavity loss against atomic loss at level `n`:
/// kappa = n (g/Delta)^2 gamma_e.
pub fn optimal_delta_cap(g: f64, kappa: f64, gamma_e: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(CarveError::InvalidParameter {
            name: "n",
            value: 0.0,
            reason: "balanced detuning needs n >= 1",
        });
    }
    for (name, v) in [("g", g), ("kappa", kappa), ("gamma_e", gamma_e)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(CarveError::InvalidParameter { name, value: v, reason: "must be positive" });
        }
    }
    Ok(g * (n as f64 * gamma_e / kappa).sqrt())
}

/// Exact one-photon resonance of level m.
///
/// The photon state couples to the source atom (g) and to the ensemble
/// (g sqrt(m)); both excited states sit at Delta with width gamma_e, so only
/// their bright combination, coupled at g sqrt(m+1), matters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressedLevel {
    pub m: usize,
    /// Tone detuning of the resonance, the exact version of (m+1)d.
    pub shift: f64,
    /// Energy decay rate of the dressed photon state, the exact version of kappa_m.
    pub width: f64,
    /// Squared overlap of the dressed state with the source excited state;
    /// the effective coupling is Omega^2 times this.
    pub coupling_factor: Complex64,
}

pub fn dressed_level(params: &PhysicalParams, m: usize) -> DressedLevel {
    let a = Complex64::new(0.0, -0.5 * params.kappa());
    let b = Complex64::new(params.delta_cap(), -0.5 * params.gamma_e());
    let big_g2 = params.g() * params.g() * (m + 1) as f64;
    let half = (b - a) * 0.5;
    let root = (half * half + big_g2).sqrt();
    let mid = (a + b) * 0.5;
    let (l1, l2) = (mid - root, mid + root);
    let lambda = if (l1 - a).norm() <= (l2 - a).norm() { l1 } else { l2 };
    let lb = lambda - b;
    DressedLevel {
        m,
        shift: -lambda.re,
        width: -2.0 * lambda.im,
        coupling_factor: params.g() * params.g() / (lb * lb + big_g2),
    }
}

/// Weak-drive self-energy of (down, 0, m) under one tone.
///
/// Decay rate is -2 Im, Stark phase rate is -Re.
pub fn self_energy(params: &PhysicalParams, tone: &DriveTone, m: usize) -> Complex64 {
    let g2 = params.g() * params.g();
    let big_g2 = g2 * (m + 1) as f64;
    let a = Complex64::new(0.0, -0.5 * params.kappa());
    let b = Complex64::new(params.delta_cap(), -0.5 * params.gamma_e());
    let z = Complex64::new(-tone.delta, 0.0);
    let bright = (z - a) / ((z - a) * (z - b) - big_g2);
    let dark = 1.0 / (z - b);
    let resolvent = (bright + dark * m as f64) * (g2 / big_g2);
    resolvent * tone.omega * tone.omega
}

/// Self-energy the tone would give (down, 0, m) through the source atom alone,
/// Omega^2 / (z - b). It does not depend on m, so it only adds a common phase
/// and a common loss.
pub fn bare_self_energy(params: &PhysicalParams, tone: &DriveTone) -> Complex64 {
    let b = Complex64::new(params.delta_cap(), -0.5 * params.gamma_e());
    tone.omega * tone.omega / (Complex64::new(-tone.delta, 0.0) - b)
}

/// Cavity-mediated part of the self-energy: [`self_energy`] minus
/// [`bare_self_energy`], equal to Omega^2 g^2 / ((z - b)((z - a)(z - b) - G^2)).
pub fn cavity_self_energy(params: &PhysicalParams, tone: &DriveTone, m: usize) -> Complex64 {
    let a = Complex64::new(0.0, -0.5 * params.kappa());
    let b = Complex64::new(params.delta_cap(), -0.5 * params.gamma_e());
    let z = Complex64::new(-tone.delta, 0.0);
    let big_g2 = params.g() * params.g() * (m + 1) as f64;
    tone.omega * tone.omega * params.g() * params.g() / ((z - b) * ((z - a) * (z - b) - big_g2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateLaw {
    /// Lorentzian centred at (m+1)d with width kappa_m.
    Dispersive,
    /// Lorentzian at the exact one-photon pole of level m.
    Dressed,
    /// Exact weak-drive self-energy, including off-resonant tails.
    #[default]
    Resolvent,
}

impl RateLaw {
    /// (decay rate, Stark phase rate) of level m under one tone.
    pub fn rates(&self, params: &PhysicalParams, tone: &DriveTone, m: usize) -> (f64, f64) {
        match self {
            RateLaw::Dispersive => (gamma_m(params, tone, m), stark_rate(params, tone, m)),
            RateLaw::Dressed => {
                let lvl = dressed_level(params, m);
                let w2 = tone.omega * tone.omega * lvl.coupling_factor.norm();
                lorentzian(w2, lvl.width, tone.delta - lvl.shift)
            }
            RateLaw::Resolvent => {
                let s = self_energy(params, tone, m);
                (-2.0 * s.im, -s.re)
            }
        }
    }

    /// Tone detuning that addresses level m resonantly.
    pub fn resonance(&self, params: &PhysicalParams, m: usize) -> f64 {
        match self {
            RateLaw::Dispersive => (m + 1) as f64 * params.dispersive_shift(),
            RateLaw::Dressed | RateLaw::Resolvent => dressed_level(params, m).shift,
        }
    }

    pub fn linewidth(&self, params: &PhysicalParams, m: usize) -> f64 {
        match self {
            RateLaw::Dispersive => kappa_m(params, m),
            RateLaw::Dressed | RateLaw::Resolvent => dressed_level(params, m).width,
        }
    }
}

/// Per-level linewidths plus per-level, per-tone decay and phase rates.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub law: RateLaw,
    pub kappa_m: Vec<f64>,
    /// gamma[m][j]: decay of level m from tone j.
    pub gamma: Vec<Vec<f64>>,
    /// phase[m][j]: Stark phase rate of level m from tone j.
    pub phase: Vec<Vec<f64>>,
}

impl RateTable {
    pub fn new(params: &PhysicalParams, tones: &[DriveTone], n_qubits: usize, law: RateLaw) -> Self {
        let levels = 0..=n_qubits;
        let kappa_m = levels.clone().map(|m| law.linewidth(params, m)).collect();
        let (gamma, phase) = levels
            .map(|m| tones.iter().map(|t| law.rates(params, t, m)).unzip())
            .unzip();
        Self { law, kappa_m, gamma, phase }
    }

    pub fn n_levels(&self) -> usize {
        self.kappa_m.len()
    }

    /// Sum over tones of the decay rate of level m.
    pub fn total_rate(&self, m: usize) -> f64 {
        self.gamma[m].iter().sum()
    }

    pub fn total_phase_rate(&self, m: usize) -> f64 {
        self.phase[m].iter().sum()
    }

    pub fn total_rates(&self) -> Vec<f64> {
        (0..self.n_levels()).map(|m| self.total_rate(m)).collect()
    }
}

/// Two-state-per-level effective Hamiltonian for one tone.
///
/// Ordering: psi0_0..psi0_N (ground dressed states), then psi1_0..psi1_N
/// (one-photon dressed states). Diagonal (-delta, -(m+1)d - i kappa_m/2),
/// coupling w. Resonance therefore sits at delta = (m+1)d.
pub fn dressed_effective_h(
    params: &PhysicalParams,
    tone: &DriveTone,
    n_qubits: usize,
) -> Result<SparseOperator> {
    params.require_dispersive()?;
    let n = n_qubits;
    let w = Complex64::new(tone.w(params), 0.0);
    let d = params.dispersive_shift();
    let mut h = SparseOperator::zeros(2 * (n + 1));
    for m in 0..=n {
        let (g0, g1) = (m, n + 1 + m);
        h.add(g0, g0, Complex64::new(-tone.delta, 0.0));
        h.add(g1, g1, Complex64::new(-((m + 1) as f64) * d, -0.5 * kappa_m(params, m)));
        h.add(g0, g1, w);
        h.add(g1, g0, w);
    }
    Ok(h)
}
