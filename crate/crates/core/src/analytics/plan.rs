use serde::{Deserialize, Serialize};

use crate::error::{CarveError, Result};
use crate::model::{kappa_m, DriveTone, PhysicalParams, RateLaw, RateTable};
use crate::state_space::css_weights;

/// Where each resonant tone is placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TonePlacement {
    /// On the exact one-photon resonance of the level.
    #[default]
    Dressed,
    /// On the dispersive estimate (m+1)d.
    Dispersive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanOptions {
    /// Common effective coupling as a fraction of the narrowest linewidth.
    pub w_fraction: f64,
    pub placement: TonePlacement,
    /// Law used to predict rates and the carve duration.
    pub rate_law: RateLaw,
    /// Required suppression of every undesired level relative to the kept one.
    pub target_suppression: Option<f64>,
    pub max_duration: Option<f64>,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            w_fraction: 1.0 / 20.0,
            placement: TonePlacement::Dressed,
            rate_law: RateLaw::Resolvent,
            target_suppression: None,
            max_duration: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannedTone {
    /// Level addressed resonantly.
    pub level: usize,
    pub tone: DriveTone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarvePlan {
    pub n_qubits: usize,
    /// Levels left undriven, ascending.
    pub keep: Vec<usize>,
    pub tones: Vec<PlannedTone>,
    pub w: f64,
    /// Carve duration in us.
    pub duration: f64,
    pub rate_law: RateLaw,
}

impl CarvePlan {
    pub fn drive_tones(&self) -> Vec<DriveTone> {
        self.tones.iter().map(|t| t.tone).collect()
    }

    /// The same layout with every Omega multiplied by `factor`; the duration
    /// shrinks by factor^2 since rates scale with w^2.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            tones: self.tones.iter().map(|t| PlannedTone { level: t.level, tone: t.tone.scaled(factor) }).collect(),
            w: self.w * factor,
            duration: self.duration / (factor * factor),
            ..self.clone()
        }
    }
}

/// One resonant tone on every level except `keep_m`, all at a common
/// perturbative coupling. The duration is 1/Gamma_keep, where Gamma_keep sums
/// the off-resonant contributions of all tones, unless a target suppression
/// asks for longer.
pub fn plan_dicke_carve(
    n_qubits: usize,
    keep_m: usize,
    params: &PhysicalParams,
    opts: &PlanOptions,
) -> Result<CarvePlan> {
    plan_subspace_carve(n_qubits, &[keep_m], params, opts)
}

/// Carve onto the span of several levels. The duration uses the fastest
/// decaying kept level.
pub fn plan_subspace_carve(
    n_qubits: usize,
    keep: &[usize],
    params: &PhysicalParams,
    opts: &PlanOptions,
) -> Result<CarvePlan> {
    if let Some(&m) = keep.iter().find(|&&m| m > n_qubits) {
        return Err(CarveError::LevelOutOfRange { m, n_qubits });
    }
    if keep.is_empty() {
        return Err(CarveError::InvalidParameter { name: "keep", value: 0.0, reason: "needs at least one level" });
    }
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    let w = opts.w_fraction * kappa_m(params, 0);
    let mut tones = Vec::with_capacity(n_qubits);
    for m in (0..=n_qubits).filter(|m| !keep.contains(m)) {
        let delta = match opts.placement {
            TonePlacement::Dressed => RateLaw::Dressed.resonance(params, m),
            TonePlacement::Dispersive => RateLaw::Dispersive.resonance(params, m),
        };
        tones.push(PlannedTone { level: m, tone: DriveTone::from_w(delta, w, params)? });
    }
    let mut plan = CarvePlan { n_qubits, keep, tones, w, duration: 0.0, rate_law: opts.rate_law };
    if plan.tones.is_empty() {
        return Ok(plan);
    }
    let table = RateTable::new(params, &plan.drive_tones(), n_qubits, opts.rate_law);
    let keep_rate = plan.keep.iter().map(|&m| table.total_rate(m)).fold(0.0, f64::max);
    let mut duration = 1.0 / keep_rate;
    if let Some(target) = opts.target_suppression {
        let gap = (0..=n_qubits)
            .filter(|m| !plan.keep.contains(m))
            .map(|m| table.total_rate(m) - keep_rate)
            .fold(f64::INFINITY, f64::min);
        let required = if gap > 0.0 { (1.0 / target).ln() / gap } else { f64::INFINITY };
        if let Some(max) = opts.max_duration {
            if required > max {
                return Err(CarveError::UnreachableSuppression { target, required, max_duration: max });
            }
        }
        duration = duration.max(required);
    }
    plan.duration = duration;
    Ok(plan)
}

/// Rate-summed prediction of a carve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiTonePrediction {
    pub rates: Vec<f64>,
    /// Unnormalized down-block populations at the end of the carve.
    pub populations: Vec<f64>,
    pub epsilon: f64,
    pub success_probability: f64,
    pub duration: f64,
}

/// Infidelity to the kept levels after evolving initial `weights` for `t`
/// with per-level decay `rates`: populations w_m e^{-Gamma_m t},
/// epsilon = 1 - kept share.
pub fn summed_infidelity(rates: &[f64], weights: &[f64], keep: &[usize], t: f64) -> MultiTonePrediction {
    let populations: Vec<f64> = rates.iter().zip(weights).map(|(g, w)| w * (-g * t).exp()).collect();
    let total: f64 = populations.iter().sum();
    let kept: f64 = keep.iter().map(|&m| populations[m]).sum();
    MultiTonePrediction {
        rates: rates.to_vec(),
        epsilon: 1.0 - kept / total,
        success_probability: total,
        populations,
        duration: t,
    }
}

/// Rate-additive prediction for a plan acting on the coherent spin state, at
/// the plan's duration.
pub fn multi_tone_infidelity(plan: &CarvePlan, params: &PhysicalParams) -> MultiTonePrediction {
    let table = RateTable::new(params, &plan.drive_tones(), plan.n_qubits, plan.rate_law);
    summed_infidelity(&table.total_rates(), &css_weights(plan.n_qubits), &plan.keep, plan.duration)
}

/// Time at which sum_m w_m e^{-Gamma_m t} reaches w_keep / e.
pub fn predicted_t_1e(rates: &[f64], weights: &[f64], keep: usize) -> Result<f64> {
    let target = weights[keep] / std::f64::consts::E;
    let f = |t: f64| rates.iter().zip(weights).map(|(g, w)| w * (-g * t).exp()).sum::<f64>() - target;
    let mut hi = 1.0 / rates[keep].max(f64::MIN_POSITIVE);
    let mut tries = 0;
    while f(hi) > 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(CarveError::NoCrossing { threshold: target, t_max: hi });
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
