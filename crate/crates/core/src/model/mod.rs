//! Physical parameters, Hamiltonian builders and analytic rate quantities.
//!
//! Every rate and frequency is an angular frequency in rad/us. Helpers named
//! `*_mhz` take plain MHz values and apply the 2 pi factor.

mod hamiltonian;
mod rates;

pub use hamiltonian::{
    build_h_source, build_h_target, build_h_total, collapse_channels, dissipator_diagonal,
    JumpOperator,
};
pub use rates::{
    bare_self_energy, cavity_self_energy, dressed_effective_h, dressed_level, gamma_m, kappa_m, kappa_m_with, optimal_delta_cap,
    self_energy, stark_rate, DressedLevel, KappaConvention, RateLaw, RateTable,
};

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{CarveError, Result};

pub const DEFAULT_DISPERSIVE_THRESHOLD: f64 = 0.2;

/// Converts MHz to rad/us.
pub fn mhz(value: f64) -> f64 {
    TAU * value
}

/// Converts rad/us to MHz.
pub fn to_mhz(value: f64) -> f64 {
    value / TAU
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    g: f64,
    kappa: f64,
    gamma_e: f64,
    delta_cap: f64,
    #[serde(default = "default_threshold")]
    dispersive_threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_DISPERSIVE_THRESHOLD
}

fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(CarveError::InvalidParameter { name, value, reason: "must be positive and finite" })
    }
}

impl PhysicalParams {
    /// All arguments in rad/us.
    pub fn new(g: f64, kappa: f64, gamma_e: f64, delta_cap: f64) -> Result<Self> {
        Ok(Self {
            g: positive("g", g)?,
            kappa: positive("kappa", kappa)?,
            gamma_e: positive("gamma_e", gamma_e)?,
            delta_cap: positive("delta_cap", delta_cap)?,
            dispersive_threshold: DEFAULT_DISPERSIVE_THRESHOLD,
        })
    }

    pub fn from_mhz(g: f64, kappa: f64, gamma_e: f64, delta_cap: f64) -> Result<Self> {
        Self::new(mhz(g), mhz(kappa), mhz(gamma_e), mhz(delta_cap))
    }

    /// Chooses the detuning that balances cavity and atomic losses at level `n`.
    pub fn balanced(g: f64, kappa: f64, gamma_e: f64, n: usize) -> Result<Self> {
        let delta = optimal_delta_cap(g, kappa, gamma_e, n)?;
        Self::new(g, kappa, gamma_e, delta)
    }

    /// Reference operating point: g = 8.5, kappa = 0.2, gamma_e = 6, Delta = 66 (x 2 pi MHz).
    pub fn reference() -> Self {
        Self::from_mhz(8.5, 0.2, 6.0, 66.0).expect("valid constants")
    }

    pub fn with_dispersive_threshold(mut self, threshold: f64) -> Result<Self> {
        self.dispersive_threshold = positive("dispersive_threshold", threshold)?;
        Ok(self)
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn gamma_e(&self) -> f64 {
        self.gamma_e
    }

    pub fn delta_cap(&self) -> f64 {
        self.delta_cap
    }

    /// C = g^2 / (kappa gamma_e).
    pub fn cooperativity(&self) -> f64 {
        self.g * self.g / (self.kappa * self.gamma_e)
    }

    /// Dispersive shift per atom, g^2 / Delta.
    pub fn dispersive_shift(&self) -> f64 {
        self.g * self.g / self.delta_cap
    }

    /// Atomic contribution to the dressed linewidth per excitation, (g/Delta)^2 gamma_e.
    pub fn atomic_width(&self) -> f64 {
        let r = self.g / self.delta_cap;
        r * r * self.gamma_e
    }

    pub fn dispersive_ratio(&self) -> f64 {
        self.g / self.delta_cap
    }

    pub fn is_dispersive(&self) -> bool {
        self.dispersive_ratio() < self.dispersive_threshold
    }

    pub fn require_dispersive(&self) -> Result<()> {
        if self.is_dispersive() {
            Ok(())
        } else {
            Err(CarveError::NotDispersive {
                ratio: self.dispersive_ratio(),
                threshold: self.dispersive_threshold,
            })
        }
    }

    pub fn dispersive_threshold(&self) -> f64 {
        self.dispersive_threshold
    }

    /// Copy with a different coupling; Delta is kept unless rebalanced by the caller.
    pub fn with_g(&self, g: f64) -> Result<Self> {
        Ok(Self { g: positive("g", g)?, ..*self })
    }

    pub fn with_delta_cap(&self, delta_cap: f64) -> Result<Self> {
        Ok(Self { delta_cap: positive("delta_cap", delta_cap)?, ..*self })
    }
}

/// A drive on the source atom's down-to-excited transition.
///
/// `delta` is measured from the empty-cavity resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveTone {
    pub delta: f64,
    pub omega: f64,
}

impl DriveTone {
    pub fn new(delta: f64, omega: f64) -> Result<Self> {
        if !delta.is_finite() {
            return Err(CarveError::InvalidParameter {
                name: "delta",
                value: delta,
                reason: "must be finite",
            });
        }
        Ok(Self { delta, omega: positive("omega", omega)? })
    }

    /// Builds the tone whose effective coupling to the dressed cavity state is `w`.
    pub fn from_w(delta: f64, w: f64, params: &PhysicalParams) -> Result<Self> {
        Self::new(delta, w * params.delta_cap() / params.g())
    }

    /// Effective coupling w = Omega g / Delta.
    pub fn w(&self, params: &PhysicalParams) -> f64 {
        self.omega * params.g() / params.delta_cap()
    }

    /// True when w <= kappa_min / 20, kappa_min being the narrowest dressed line.
    pub fn is_perturbative(&self, params: &PhysicalParams) -> bool {
        self.w(params) <= kappa_m(params, 0) / 20.0 * (1.0 + 1e-12)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { delta: self.delta, omega: self.omega * factor }
    }
}
