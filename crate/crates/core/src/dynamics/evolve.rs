use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::propagator::{default_frame, Propagator, Rk4Density, Rk4Vector};
use crate::error::{CarveError, Result};
use crate::model::{DriveTone, PhysicalParams};
use crate::state_space::{min_eigenvalue, JointBasis, JointState, StateData};

/// Trace drift above which a master-equation run aborts.
pub const TRACE_ABORT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Frame {
    /// Tone frequency for a single tone, empty-cavity frequency otherwise.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    /// Spacing of recorded samples in us; `None` gives about 1000 samples.
    pub sample_interval: Option<f64>,
    /// Stop at the first sample where the down-block weight falls below this.
    pub stop_below_down: Option<f64>,
    /// Apply the m <-> N-m echo permutation of the down block at this time.
    pub flip_at: Option<f64>,
    /// Record full joint-state snapshots (the down block is always recorded).
    pub keep_states: bool,
    /// Track the smallest density eigenvalue at every sample.
    pub track_eigenvalues: bool,
    pub frame: Frame,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            sample_interval: None,
            stop_below_down: None,
            flip_at: None,
            keep_states: true,
            track_eigenvalues: true,
            frame: Frame::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    pub steps: u64,
    pub dt: f64,
    pub frame: f64,
    pub max_trace_drift: f64,
    pub max_hermiticity_deviation: f64,
    /// Smallest density eigenvalue seen at any sample (density runs only).
    pub min_eigenvalue: Option<f64>,
    pub stopped_early: bool,
}

/// Sampled trajectory. Coherent quantities are reported in the frame
/// rotating at the empty-cavity frequency whatever frame integrated them.
#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub n_qubits: usize,
    pub times: Vec<f64>,
    /// Total weight of the source-down block.
    pub survival: Vec<f64>,
    pub lost_weight: Vec<f64>,
    /// Weight in the transiently excited sector (neither down nor LOST).
    pub excited_weight: Vec<f64>,
    /// Populations of (down, 0, m) for m = 0..=N at each sample.
    pub level_populations: Vec<Vec<f64>>,
    /// Unnormalized down-block density at each sample.
    pub down_blocks: Vec<DMatrix<Complex64>>,
    pub states: Vec<JointState>,
    pub diagnostics: Diagnostics,
}

impl EvolutionResult {
    fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            times: Vec::new(),
            survival: Vec::new(),
            lost_weight: Vec::new(),
            excited_weight: Vec::new(),
            level_populations: Vec::new(),
            down_blocks: Vec::new(),
            states: Vec::new(),
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn level_series(&self, m: usize) -> Vec<f64> {
        self.level_populations.iter().map(|p| p[m]).collect()
    }

    /// Down-block density at time `t`, linearly interpolated between samples.
    pub fn down_block_at(&self, t: f64) -> DMatrix<Complex64> {
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 {
            return self.down_blocks[0].clone();
        }
        if i >= self.times.len() {
            return self.down_blocks[self.times.len() - 1].clone();
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let f = (t - t0) / (t1 - t0);
        &self.down_blocks[i - 1] * Complex64::new(1.0 - f, 0.0) + &self.down_blocks[i] * Complex64::new(f, 0.0)
    }

    /// CSV with columns time_us, p_down, p_lost, pop_m0..pop_mN.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time_us".to_string(), "p_down".into(), "p_lost".into()];
        header.extend((0..=self.n_qubits).map(|m| format!("pop_m{m}")));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![
                format!("{:.9e}", self.times[i]),
                format!("{:.12e}", self.survival[i]),
                format!("{:.12e}", self.lost_weight[i]),
            ];
            row.extend(self.level_populations[i].iter().map(|p| format!("{p:.12e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

struct Schedule {
    steps: u64,
    dt: f64,
    stride: u64,
    flip_step: Option<u64>,
}

fn schedule(prop: &Propagator, t_final: f64, dt: f64, opts: &EvolveOptions) -> Result<Schedule> {
    prop.check_dt(dt)?;
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(CarveError::InvalidParameter {
            name: "t_final",
            value: t_final,
            reason: "must be non-negative and finite",
        });
    }
    let steps = (t_final / dt).ceil() as u64;
    let dt = if steps == 0 { dt } else { t_final / steps as f64 };
    let interval = opts.sample_interval.unwrap_or(t_final / 1000.0);
    let stride = ((interval / dt).round() as u64).max(1);
    let flip_step = opts.flip_at.map(|t| (t / dt).round() as u64);
    Ok(Schedule { steps, dt, stride, flip_step })
}

fn resolve_frame(frame: Frame, tones: &[DriveTone]) -> f64 {
    match frame {
        Frame::Auto => default_frame(tones),
        Frame::Fixed(r) => r,
    }
}

fn down_permutation(n: usize) -> impl Fn(usize) -> usize {
    // Down block occupies indices 0..=N.
    move |i| if i <= n { n - i } else { i }
}

/// Conditional evolution under H_eff = H - (i/2) sum L^dag L from a pure state.
///
/// The squared norm is the no-jump probability.
pub fn evolve_no_jump(
    initial: &JointState,
    params: &PhysicalParams,
    tones: &[DriveTone],
    t_final: f64,
    dt: f64,
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    let psi0 = initial.as_pure().ok_or_else(|| CarveError::InvalidState {
        kind: "pure state",
        reason: "no-jump evolution needs a state vector".into(),
    })?;
    let basis = initial.basis().clone();
    let prop = Propagator::new(params, tones, &basis, resolve_frame(opts.frame, tones));
    let sched = schedule(&prop, t_final, dt, opts)?;
    let n = prop.reduced_dim();
    let lost0 = psi0[basis.lost()].norm_sqr();
    // Both frames coincide at t = 0.
    let mut psi: Vec<Complex64> = psi0.iter().take(n).copied().collect();
    let norm0 = initial.norm_or_trace();

    let mut out = EvolutionResult::new(basis.n_qubits());
    out.diagnostics = Diagnostics { dt: sched.dt, frame: prop.frame(), ..Default::default() };
    let mut rk = Rk4Vector::new(n);
    let mut clock = prop.clock(0.0, sched.dt);
    let flip = down_permutation(basis.n_qubits());

    let record = |out: &mut EvolutionResult, psi: &[Complex64], t: f64| {
        let phase = prop.frame_phase(t);
        let full: DVector<Complex64> = DVector::from_iterator(
            n + 1,
            (0..=n).map(|i| {
                if i == n {
                    Complex64::new(0.0, 0.0)
                } else if prop.is_rotated(i) {
                    psi[i] * phase
                } else {
                    psi[i]
                }
            }),
        );
        let down = full.rows(0, basis.n_qubits() + 1).into_owned();
        let pops: Vec<f64> = down.iter().map(|z| z.norm_sqr()).collect();
        let p_down: f64 = pops.iter().sum();
        let total: f64 = full.norm_squared();
        out.times.push(t);
        out.survival.push(p_down);
        // Norm lost so far is the probability that some jump happened.
        out.lost_weight.push(lost0 + (norm0 - lost0 - total).max(0.0));
        out.excited_weight.push(total - p_down);
        out.level_populations.push(pops);
        out.down_blocks.push(&down * down.adjoint());
        if opts.keep_states {
            out.states.push(JointState::from_parts(basis.clone(), StateData::Pure(full)));
        }
        p_down
    };

    record(&mut out, &psi, 0.0);
    for step in 1..=sched.steps {
        let c = clock.stage_values();
        rk.step(&prop, &mut psi, c, sched.dt);
        clock.advance(0.0);
        if sched.flip_step == Some(step) {
            permute_vector(&mut psi, &flip, basis.n_qubits());
        }
        if step % sched.stride == 0 || step == sched.steps {
            let t = step as f64 * sched.dt;
            let p_down = record(&mut out, &psi, t);
            if opts.stop_below_down.is_some_and(|s| p_down < s) {
                out.diagnostics.stopped_early = true;
                out.diagnostics.steps = step;
                return Ok(out);
            }
        }
    }
    out.diagnostics.steps = sched.steps;
    Ok(out)
}

fn permute_vector(psi: &mut [Complex64], flip: &impl Fn(usize) -> usize, n_qubits: usize) {
    let down: Vec<Complex64> = (0..=n_qubits).map(|i| psi[flip(i)]).collect();
    psi[..=n_qubits].copy_from_slice(&down);
}

/// Lindblad evolution of a density matrix with fixed-step RK4.
///
/// Aborts with `TraceDrift` if the trace moves by more than 1e-6.
pub fn evolve_master(
    initial: &JointState,
    params: &PhysicalParams,
    tones: &[DriveTone],
    t_final: f64,
    dt: f64,
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    let basis = initial.basis().clone();
    let rho0 = initial.to_density();
    let prop = Propagator::new(params, tones, &basis, resolve_frame(opts.frame, tones));
    let sched = schedule(&prop, t_final, dt, opts)?;
    let n = prop.reduced_dim();
    let lost_idx = basis.lost();
    for j in 0..n {
        if rho0[(lost_idx, j)].norm() > 0.0 {
            return Err(CarveError::InvalidState {
                kind: "density matrix",
                reason: "LOST cannot carry coherences".into(),
            });
        }
    }
    let mut rho: Vec<Complex64> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            rho.push(rho0[(i, j)]);
        }
    }
    let mut lost = rho0[(lost_idx, lost_idx)].re;
    let trace0 = rho0.trace().re;

    let mut out = EvolutionResult::new(basis.n_qubits());
    out.diagnostics = Diagnostics { dt: sched.dt, frame: prop.frame(), ..Default::default() };
    let mut rk = Rk4Density::new(n);
    let mut clock = prop.clock(0.0, sched.dt);
    let flip = down_permutation(basis.n_qubits());
    let nq = basis.n_qubits();

    let record = |out: &mut EvolutionResult, rho: &[Complex64], lost: f64, t: f64| -> Result<f64> {
        let phase = prop.frame_phase(t);
        let full = DMatrix::from_fn(n + 1, n + 1, |i, j| {
            if i == n || j == n {
                return if i == j { Complex64::new(lost, 0.0) } else { Complex64::new(0.0, 0.0) };
            }
            let v = rho[i * n + j];
            match (prop.is_rotated(i), prop.is_rotated(j)) {
                (true, false) => v * phase,
                (false, true) => v * phase.conj(),
                _ => v,
            }
        });
        let down = full.view((0, 0), (nq + 1, nq + 1)).into_owned();
        let pops: Vec<f64> = (0..=nq).map(|m| down[(m, m)].re).collect();
        let p_down: f64 = pops.iter().sum();
        let trace: f64 = (0..n).map(|i| rho[i * n + i].re).sum::<f64>() + lost;
        let drift = (trace - trace0).abs();
        out.diagnostics.max_trace_drift = out.diagnostics.max_trace_drift.max(drift);
        if drift > TRACE_ABORT {
            return Err(CarveError::TraceDrift { drift, time: t, limit: TRACE_ABORT });
        }
        if opts.track_eigenvalues {
            let ev = min_eigenvalue(&full);
            let prev = out.diagnostics.min_eigenvalue.unwrap_or(f64::INFINITY);
            out.diagnostics.min_eigenvalue = Some(prev.min(ev));
        }
        out.times.push(t);
        out.survival.push(p_down);
        out.lost_weight.push(lost);
        out.excited_weight.push(trace - p_down - lost);
        out.level_populations.push(pops);
        out.down_blocks.push(down);
        if opts.keep_states {
            out.states.push(JointState::from_parts(basis.clone(), StateData::Density(full)));
        }
        Ok(p_down)
    };

    record(&mut out, &rho, lost, 0.0)?;
    for step in 1..=sched.steps {
        let c = clock.stage_values();
        let dev = rk.step(&prop, &mut rho, &mut lost, c, sched.dt);
        out.diagnostics.max_hermiticity_deviation = out.diagnostics.max_hermiticity_deviation.max(dev);
        clock.advance(0.0);
        if sched.flip_step == Some(step) {
            permute_density(&mut rho, n, &flip, nq);
        }
        if step % sched.stride == 0 || step == sched.steps {
            let t = step as f64 * sched.dt;
            let p_down = record(&mut out, &rho, lost, t)?;
            if opts.stop_below_down.is_some_and(|s| p_down < s) {
                out.diagnostics.stopped_early = true;
                out.diagnostics.steps = step;
                return Ok(out);
            }
        }
    }
    out.diagnostics.steps = sched.steps;
    Ok(out)
}

fn permute_density(rho: &mut [Complex64], n: usize, flip: &impl Fn(usize) -> usize, _nq: usize) {
    let old = rho.to_vec();
    for i in 0..n {
        for j in 0..n {
            rho[i * n + j] = old[flip(i) * n + flip(j)];
        }
    }
}

/// Per-level exact propagator for a static (single-tone or undriven) segment.
///
/// Level m couples only (down, m), (e, m), (up, 1, m) and (up, 0, m_e), so the
/// no-jump generator splits into blocks of at most four states, each
/// exponentiated exactly. The returned operator acts in the r = 0 frame over
/// [t0, t0 + duration].
pub fn static_segment(
    params: &PhysicalParams,
    tone: Option<&DriveTone>,
    basis: &Arc<JointBasis>,
    t0: f64,
    duration: f64,
) -> Result<Vec<(Vec<usize>, DMatrix<Complex64>)>> {
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(CarveError::InvalidParameter {
            name: "duration",
            value: duration,
            reason: "must be non-negative and finite",
        });
    }
    let r = tone.map_or(0.0, |t| t.delta);
    let omega = tone.map_or(0.0, |t| t.omega);
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let mut blocks = Vec::with_capacity(basis.n_qubits() + 1);
    for m in 0..=basis.n_qubits() {
        let mut idx = vec![basis.down(m), basis.source_excited(m), basis.photon(m)];
        if m >= 1 {
            idx.push(basis.ensemble_excited(m));
        }
        let k = idx.len();
        let mut h = DMatrix::<Complex64>::zeros(k, k);
        let excited = params.delta_cap() + r;
        h[(1, 1)] = c(excited, -0.5 * params.gamma_e());
        h[(2, 2)] = c(r, -0.5 * params.kappa());
        h[(0, 1)] = c(omega, 0.0);
        h[(1, 0)] = c(omega, 0.0);
        h[(1, 2)] = c(params.g(), 0.0);
        h[(2, 1)] = c(params.g(), 0.0);
        if k == 4 {
            let gm = params.g() * (m as f64).sqrt();
            h[(3, 3)] = c(excited, -0.5 * params.gamma_e());
            h[(2, 3)] = c(gm, 0.0);
            h[(3, 2)] = c(gm, 0.0);
        }
        let u = (h * c(0.0, -duration)).exp();
        // Into the working frame at t0, out of it at t0 + duration.
        let into = Complex64::cis(-r * t0);
        let out = Complex64::cis(r * (t0 + duration));
        let frame = DMatrix::from_fn(k, k, |i, j| {
            let fi = if i == 0 { Complex64::new(1.0, 0.0) } else { out };
            let fj = if j == 0 { Complex64::new(1.0, 0.0) } else { into };
            u[(i, j)] * fi * fj
        });
        blocks.push((idx, frame));
    }
    Ok(blocks)
}

/// Applies a static segment to an unnormalized pure state (LOST untouched).
pub fn apply_segment(blocks: &[(Vec<usize>, DMatrix<Complex64>)], psi: &mut DVector<Complex64>) {
    for (idx, u) in blocks {
        let local = DVector::from_iterator(idx.len(), idx.iter().map(|&i| psi[i]));
        let next = u * local;
        for (k, &i) in idx.iter().enumerate() {
            psi[i] = next[k];
        }
    }
}
