//! End-to-end experiments: configuration, runners and their file outputs.
//!
//! Configs are JSON. Every frequency in a config is in MHz and every time in
//! us; the 2 pi factor is applied when building [`PhysicalParams`].

mod runners;

pub use runners::{
    run_dicke_carve, run_ghz_curve, run_phase_plan, run_spectrum, run_sweep, DickeReport,
    GhzCurveRow, LevelDecay, PhasePlanReport, SpectrumRow, SweepPoint, SweepReport,
};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytics::{PlanOptions, TonePlacement};
use crate::error::{CarveError, Result};
use crate::model::{optimal_delta_cap, DriveTone, PhysicalParams, RateLaw};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    DickeCarve,
    Sweep,
    GhzCurve,
    PhasePlan,
    Spectrum,
}

/// Physical parameters in MHz. Give either `delta_mhz` or `auto_balance_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub g_mhz: f64,
    pub kappa_mhz: f64,
    pub gamma_e_mhz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_mhz: Option<f64>,
    /// Choose Delta so that cavity and atomic loss balance at this level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auto_balance_n: Option<usize>,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self { g_mhz: 8.5, kappa_mhz: 0.2, gamma_e_mhz: 6.0, delta_mhz: Some(66.0), auto_balance_n: None }
    }
}

impl ParamsConfig {
    pub fn resolve(&self) -> Result<PhysicalParams> {
        match (self.delta_mhz, self.auto_balance_n) {
            (Some(d), None) => PhysicalParams::from_mhz(self.g_mhz, self.kappa_mhz, self.gamma_e_mhz, d),
            (None, Some(n)) => {
                let d = optimal_delta_cap(self.g_mhz, self.kappa_mhz, self.gamma_e_mhz, n)?;
                PhysicalParams::from_mhz(self.g_mhz, self.kappa_mhz, self.gamma_e_mhz, d)
            }
            _ => Err(CarveError::Config("params need exactly one of delta_mhz and auto_balance_n".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneConfig {
    pub delta_mhz: f64,
    pub omega_mhz: f64,
}

impl ToneConfig {
    pub fn resolve(&self) -> Result<DriveTone> {
        DriveTone::new(crate::model::mhz(self.delta_mhz), crate::model::mhz(self.omega_mhz))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagation {
    #[default]
    Master,
    NoJump,
}

/// Carving of the CSS onto one level or a superposition.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarveConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keep_m: Option<usize>,
    /// Target Dicke amplitudes [re, im]; levels with nonzero entries are kept.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_amplitudes: Option<Vec<[f64; 2]>>,
    /// Explicit tones replacing the planned layout.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tones: Option<Vec<ToneConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement: Option<TonePlacement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_law: Option<RateLaw>,
    #[serde(default)]
    pub propagation: Propagation,
    /// Joint-state JSON replacing the CSS as the initial state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Grid of C/N values; g is chosen per point and Delta rebalanced at N/2.
    pub c_over_n: Vec<f64>,
    #[serde(default)]
    pub propagation: SweepPropagation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepPropagation {
    #[default]
    NoJump,
    Master,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GhzConfig {
    pub c_over_n: Vec<f64>,
    #[serde(default = "default_j_max")]
    pub j_max: usize,
}

fn default_j_max() -> usize {
    crate::analytics::GHZ_DEFAULT_J_MAX
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceKind {
    /// Leading-order neighbour table at cooperativity C.
    #[default]
    Table,
    /// Exact weak-drive self-energies of the configured physical system.
    Physical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    /// Target phases in rad, N+1 entries; drawn at random from the seed if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub losses: Option<Vec<f64>>,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_rounds")]
    pub max_rounds: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub model: DisturbanceKind,
    /// Overrides the cooperativity of `params` for the table model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_over_n: Option<f64>,
    /// Simulate the schedule on the CSS (N <= 4 only).
    #[serde(default)]
    pub verify: bool,
}

fn default_b() -> f64 {
    crate::phase_control::DEFAULT_B
}

fn default_rounds() -> usize {
    10
}

fn default_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub delta_min_mhz: f64,
    pub delta_max_mhz: f64,
    pub points: usize,
    /// Probe coupling as a fraction of kappa_0.
    #[serde(default = "default_w_fraction")]
    pub w_fraction: f64,
}

fn default_w_fraction() -> f64 {
    1.0 / 20.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n_qubits: usize,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carve: Option<CarveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ghz: Option<GhzConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<PhaseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    /// Directory receiving CSV and JSON outputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Parallel sweep workers; all cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    /// Kind-specific fields present, grids non-empty, referenced files existing.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(CarveError::Config(msg.into()));
        if self.n_qubits == 0 && self.kind != ExperimentKind::GhzCurve {
            return bad("n_qubits must be at least 1");
        }
        if let Some(dt) = self.dt_us {
            if !(dt.is_finite() && dt > 0.0) {
                return bad("dt_us must be positive");
            }
        }
        if let Some(t) = self.t_final_us {
            if !(t.is_finite() && t > 0.0) {
                return bad("t_final_us must be positive");
            }
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1");
        }
        match self.kind {
            ExperimentKind::DickeCarve => {
                let Some(c) = &self.carve else { return bad("dicke_carve needs a carve section") };
                match (&c.keep_m, &c.target_amplitudes) {
                    (Some(m), None) if *m > self.n_qubits => return bad("keep_m exceeds n_qubits"),
                    (Some(_), None) => {}
                    (None, Some(t)) if t.len() != self.n_qubits + 1 => {
                        return bad("target_amplitudes needs n_qubits + 1 entries")
                    }
                    (None, Some(t)) if t.iter().all(|a| a[0] == 0.0 && a[1] == 0.0) => {
                        return bad("target_amplitudes are all zero")
                    }
                    (None, Some(_)) => {}
                    _ => return bad("carve needs exactly one of keep_m and target_amplitudes"),
                }
                if let Some(p) = &c.initial_state {
                    if !p.exists() {
                        return Err(CarveError::Config(format!("initial_state {} does not exist", p.display())));
                    }
                }
                if matches!(&c.tones, Some(t) if t.is_empty()) {
                    return bad("tones must not be empty when given");
                }
            }
            ExperimentKind::Sweep => {
                let Some(s) = &self.sweep else { return bad("sweep needs a sweep section") };
                if s.c_over_n.is_empty() {
                    return bad("sweep grid is empty");
                }
                if s.c_over_n.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                    return bad("sweep grid values must be positive");
                }
                if self.n_qubits < 2 {
                    return bad("sweep needs n_qubits >= 2 to balance at N/2");
                }
            }
            ExperimentKind::GhzCurve => {
                let Some(g) = &self.ghz else { return bad("ghz_curve needs a ghz section") };
                if g.c_over_n.is_empty() {
                    return bad("ghz grid is empty");
                }
                if g.c_over_n.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                    return bad("ghz grid values must be positive");
                }
                if g.j_max == 0 {
                    return bad("j_max must be at least 1");
                }
            }
            ExperimentKind::PhasePlan => {
                let Some(p) = &self.phase else { return bad("phase_plan needs a phase section") };
                for v in [&p.phases, &p.losses].into_iter().flatten() {
                    if v.len() != self.n_qubits + 1 {
                        return bad("phase targets need n_qubits + 1 entries");
                    }
                }
                if p.verify && self.n_qubits > 4 {
                    return bad("numerical verification is limited to n_qubits <= 4");
                }
            }
            ExperimentKind::Spectrum => {
                let Some(s) = &self.spectrum else { return bad("spectrum needs a spectrum section") };
                if s.points < 2 || s.delta_max_mhz.partial_cmp(&s.delta_min_mhz) != Some(std::cmp::Ordering::Greater) {
                    return bad("spectrum grid needs points >= 2 and max > min");
                }
            }
        }
        Ok(())
    }

    pub(crate) fn plan_options(&self) -> PlanOptions {
        let mut opts = PlanOptions::default();
        if let Some(c) = &self.carve {
            if let Some(w) = c.w_fraction {
                opts.w_fraction = w;
            }
            if let Some(p) = c.placement {
                opts.placement = p;
            }
            if let Some(l) = c.rate_law {
                opts.rate_law = l;
            }
        }
        opts
    }
}
