//! Closed-form carving predictions.

mod plan;

pub use plan::{
    multi_tone_infidelity, plan_dicke_carve, plan_subspace_carve, predicted_t_1e, summed_infidelity,
    CarvePlan, MultiTonePrediction, PlanOptions, PlannedTone, TonePlacement,
};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::PhysicalParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Counterfactual,
    Factual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub c_over_n: f64,
    pub infidelity: f64,
    pub success_probability: f64,
    pub method: Method,
}

/// Counter-factual two-level infidelity e^{-C/n} / (1 + e^{-C/n}).
pub fn cf_infidelity(c: f64, n: f64) -> f64 {
    1.0 / (1.0 + (c / n).exp())
}

/// Factual two-level infidelity 1 / (2 + C/n).
pub fn f_infidelity(c: f64, n: f64) -> f64 {
    1.0 / (2.0 + c / n)
}

/// Simplified transmission of a probe photon at detuning delta through the
/// cavity loaded with level m, under the balanced detuning:
/// T = (1/2) / (1 - i (delta - m d) / kappa).
pub fn transmission(delta: f64, m: usize, params: &PhysicalParams) -> Complex64 {
    let x = (delta - m as f64 * params.dispersive_shift()) / params.kappa();
    0.5 / Complex64::new(1.0, -x)
}

/// Factual infidelity from the transmission contrast between n and n+1 with
/// the probe on level n: |T_{n+1}|^2 / (|T_n|^2 + |T_{n+1}|^2).
pub fn f_infidelity_transmission(c: f64, n: f64) -> f64 {
    // In units of kappa, the neighbour sits sqrt(C/n) linewidths off resonance.
    let t_n = 0.5 / Complex64::new(1.0, 0.0);
    let t_next = 0.5 / Complex64::new(1.0, -(c / n).sqrt());
    let (a, b) = (t_n.norm_sqr(), t_next.norm_sqr());
    b / (a + b)
}

/// Decay rates of the odd and even Dicke levels under an infinite ladder of
/// equal tones on every odd level, in units of the resonant rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GhzRates {
    pub gamma_odd_over_res: f64,
    pub gamma_even_over_res: f64,
    pub j_max: usize,
    /// C / (N/2).
    pub c_over_n_half: f64,
    /// Integral estimates of the terms beyond j_max, included in the rates.
    pub odd_tail: f64,
    pub even_tail: f64,
}

impl GhzRates {
    pub fn ratio(&self) -> f64 {
        self.gamma_odd_over_res / self.gamma_even_over_res
    }
}

/// Ladder sums over j = 1..=j_max plus a midpoint-integral estimate of the
/// remainder, so truncation errors fall off as j_max^-3.
pub fn ghz_rates(c: f64, n_qubits: usize, j_max: usize) -> GhzRates {
    let j_max = j_max.max(1);
    let y = c / (0.5 * n_qubits as f64);
    // Smallest terms first.
    let odd_sum: f64 = (1..=j_max).rev().map(|j| 1.0 / (1.0 + (2.0 * j as f64).powi(2) * y)).sum();
    let even_sum: f64 = (1..=j_max).rev().map(|j| 1.0 / (1.0 + (2.0 * j as f64 - 1.0).powi(2) * y)).sum();
    // sum_{j > J} 1/(1 + (2j - s)^2 y) ~ int_{J+1/2}^inf dj / (1 + (2j - s)^2 y).
    let root = y.sqrt();
    let tail = |shift: f64| {
        let edge = root * (2.0 * j_max as f64 + 1.0 - shift);
        (0.5 * PI - edge.atan()) / (2.0 * root)
    };
    let (odd_tail, even_tail) = (2.0 * tail(0.0), 2.0 * tail(1.0));
    GhzRates {
        gamma_odd_over_res: 1.0 + 2.0 * odd_sum + odd_tail,
        gamma_even_over_res: 2.0 * even_sum + even_tail,
        j_max,
        c_over_n_half: y,
        odd_tail,
        even_tail,
    }
}

pub const GHZ_DEFAULT_J_MAX: usize = 10_000;

/// GHZ infidelity from the full ladder sums.
///
/// Counter-factual: e^{-r} / (e^{-r} + e^{-1}) with r = Gamma_odd / Gamma_even
/// (duration 1/Gamma_even). Factual: (1/r) / (1/r + 1).
pub fn ghz_infidelity(c: f64, n_qubits: usize, method: Method, j_max: usize) -> f64 {
    let rates = ghz_rates(c, n_qubits, j_max);
    let r = rates.ratio();
    match method {
        Method::Counterfactual => 1.0 / (1.0 + (r - 1.0).exp()),
        Method::Factual => 1.0 / (1.0 + r),
    }
}

/// Printed large-C/N form of the counter-factual curve: e^{2/3} e^{-(8/pi^2) C/N}.
pub fn ghz_cf_asymptote(c_over_n: f64) -> f64 {
    (2.0 / 3.0 - 8.0 / (PI * PI) * c_over_n).exp()
}

/// Printed large-C/N form of the factual curve: (pi^2/8) / (C/N).
pub fn ghz_f_asymptote(c_over_n: f64) -> f64 {
    PI * PI / 8.0 / c_over_n
}

/// Two-term expansion of Gamma_odd / Gamma_even for large C/N.
///
/// The even sum's second-order term contributes as much as the odd sum's
/// first-order term, so the constant is 2/3 rather than 1/3.
pub fn ghz_ratio_expansion(c_over_n: f64) -> f64 {
    8.0 / (PI * PI) * c_over_n + 2.0 / 3.0
}
