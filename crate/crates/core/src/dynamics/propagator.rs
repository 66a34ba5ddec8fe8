//! Fixed-step RK4 kernels for the no-jump and master equations.
//!
//! Work happens in a frame rotating at `r` on every non-down state: the down
//! block sits at 0, photon states at r, both excited states at Delta + r, and
//! tone j couples down to source-excited with Omega_j exp(i (delta_j - r) t).
//! LOST never couples coherently, so the kernels drop it and carry its
//! population as a scalar fed by the decay channels.

use num_complex::Complex64;

use crate::error::{CarveError, Result};
use crate::model::{DriveTone, PhysicalParams};
use crate::state_space::JointBasis;

/// Ratio between the step and the inverse of the fastest frequency.
pub const STEP_FACTOR: f64 = 0.05;

const RESYNC_EVERY: u64 = 4096;

#[derive(Debug, Clone, Copy)]
struct Tone {
    omega: f64,
    freq: f64,
}

/// Time-dependent drive amplitude on the down-to-excited transitions.
#[derive(Debug, Clone)]
pub(crate) struct ToneClock {
    tones: Vec<Tone>,
    phasors: Vec<Complex64>,
    half_turn: Vec<Complex64>,
    steps: u64,
    dt: f64,
}

impl ToneClock {
    fn new(tones: Vec<Tone>, t0: f64, dt: f64) -> Self {
        let phasors = tones.iter().map(|t| Complex64::cis(t.freq * t0)).collect();
        let half_turn = tones.iter().map(|t| Complex64::cis(0.5 * t.freq * dt)).collect();
        Self { tones, phasors, half_turn, steps: 0, dt }
    }

    /// Couplings at t, t + dt/2 and t + dt.
    pub(crate) fn stage_values(&self) -> [Complex64; 3] {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for ((tone, z), h) in self.tones.iter().zip(&self.phasors).zip(&self.half_turn) {
            let zh = z * h;
            out[0] += z * tone.omega;
            out[1] += zh * tone.omega;
            out[2] += zh * h * tone.omega;
        }
        out
    }

    pub(crate) fn advance(&mut self, t0: f64) {
        self.steps += 1;
        if self.steps.is_multiple_of(RESYNC_EVERY) {
            let t = t0 + self.steps as f64 * self.dt;
            for (z, tone) in self.phasors.iter_mut().zip(&self.tones) {
                *z = Complex64::cis(tone.freq * t);
            }
        } else {
            for (z, h) in self.phasors.iter_mut().zip(&self.half_turn) {
                *z *= h * h;
            }
        }
    }
}

/// Non-Hermitian generator H_eff(t) = H(t) - (i/2) sum_k L_k^dag L_k on the
/// joint space without LOST, stored as CSR plus the drive pairs.
#[derive(Debug, Clone)]
pub struct Propagator {
    n_qubits: usize,
    /// Reduced dimension (joint dimension minus LOST).
    dim: usize,
    frame: f64,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
    /// (down index, source-excited index) per level.
    drive_pairs: Vec<(usize, usize)>,
    tones: Vec<Tone>,
    /// (state, rate) of every channel into LOST.
    feeds: Vec<(usize, f64)>,
    max_frequency: f64,
    /// False on the down block, which the frame leaves alone.
    rotated: Vec<bool>,
}

/// Frame chosen automatically: the tone frequency for a single tone, the
/// empty-cavity frequency otherwise.
pub fn default_frame(tones: &[DriveTone]) -> f64 {
    match tones {
        [single] => single.delta,
        _ => 0.0,
    }
}

impl Propagator {
    pub fn new(params: &PhysicalParams, tones: &[DriveTone], basis: &JointBasis, frame: f64) -> Self {
        let n = basis.n_qubits();
        let dim = basis.dim() - 1;
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); dim];
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let excited = params.delta_cap() + frame;
        for m in 0..=n {
            let (e, u) = (basis.source_excited(m), basis.photon(m));
            rows[u].push((u, c(frame, -0.5 * params.kappa())));
            rows[e].push((e, c(excited, -0.5 * params.gamma_e())));
            rows[e].push((u, c(params.g(), 0.0)));
            rows[u].push((e, c(params.g(), 0.0)));
            if m >= 1 {
                let x = basis.ensemble_excited(m);
                let gm = params.g() * (m as f64).sqrt();
                rows[x].push((x, c(excited, -0.5 * params.gamma_e())));
                rows[x].push((u, c(gm, 0.0)));
                rows[u].push((x, c(gm, 0.0)));
            }
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(k, _)| k);
            for (k, v) in row {
                cols.push(k);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }

        let drive_pairs = (0..=n).map(|m| (basis.down(m), basis.source_excited(m))).collect();
        let tone_terms: Vec<Tone> =
            tones.iter().map(|t| Tone { omega: t.omega, freq: t.delta - frame }).collect();
        let feeds = crate::model::collapse_channels(params, basis)
            .into_iter()
            .map(|ch| (ch.source, ch.rate))
            .collect();
        let max_tone = tone_terms.iter().map(|t| t.freq.abs()).fold(0.0, f64::max);
        let max_frequency = (excited.abs() + max_tone)
            .max(frame.abs())
            .max(params.g())
            .max(params.kappa())
            .max(params.gamma_e());
        let mut rotated = vec![true; dim];
        for i in basis.down_block() {
            rotated[i] = false;
        }
        Self {
            n_qubits: n,
            dim,
            frame,
            row_ptr,
            cols,
            vals,
            drive_pairs,
            tones: tone_terms,
            feeds,
            max_frequency,
            rotated,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn frame(&self) -> f64 {
        self.frame
    }

    pub fn reduced_dim(&self) -> usize {
        self.dim
    }

    /// Largest step allowed: 0.05 / max(|Delta + r| + max|delta_j - r|, |r|, g, kappa, gamma_e).
    pub fn max_dt(&self) -> f64 {
        STEP_FACTOR / self.max_frequency
    }

    pub fn check_dt(&self, dt: f64) -> Result<()> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(CarveError::BadTimeStep(dt));
        }
        let max = self.max_dt();
        if dt > max * (1.0 + 1e-12) {
            return Err(CarveError::StepTooLarge { dt, max });
        }
        Ok(())
    }

    pub(crate) fn clock(&self, t0: f64, dt: f64) -> ToneClock {
        ToneClock::new(self.tones.clone(), t0, dt)
    }

    /// Phase factor exp(i r t) carried by rotated states when returning to the r = 0 frame.
    pub(crate) fn frame_phase(&self, t: f64) -> Complex64 {
        Complex64::cis(self.frame * t)
    }

    pub(crate) fn is_rotated(&self, i: usize) -> bool {
        self.rotated[i]
    }

    /// out = -i H_eff(c) psi.
    #[inline]
    fn vector_rhs(&self, psi: &[Complex64], coupling: Complex64, out: &mut [Complex64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            let mut acc = Complex64::new(0.0, 0.0);
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[idx] * psi[self.cols[idx]];
            }
            *o = acc;
        }
        let cc = coupling.conj();
        for &(d, e) in &self.drive_pairs {
            out[e] += coupling * psi[d];
            out[d] += cc * psi[e];
        }
        for z in out.iter_mut() {
            *z = Complex64::new(z.im, -z.re);
        }
    }

    /// K = H_eff(c) rho, then out = -i K + (-i K)^dag. Returns the LOST feed rate.
    #[inline]
    fn density_rhs(
        &self,
        rho: &[Complex64],
        coupling: Complex64,
        k: &mut [Complex64],
        out: &mut [Complex64],
    ) -> f64 {
        let n = self.dim;
        for i in 0..n {
            let row = &mut k[i * n..(i + 1) * n];
            row.fill(Complex64::new(0.0, 0.0));
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                let h = self.vals[idx];
                let src = &rho[self.cols[idx] * n..(self.cols[idx] + 1) * n];
                for (a, b) in row.iter_mut().zip(src) {
                    *a += h * b;
                }
            }
        }
        let cc = coupling.conj();
        for &(d, e) in &self.drive_pairs {
            for j in 0..n {
                let (rd, re) = (rho[d * n + j], rho[e * n + j]);
                k[e * n + j] += coupling * rd;
                k[d * n + j] += cc * re;
            }
        }
        for i in 0..n {
            for j in i..n {
                let a = k[i * n + j];
                let b = k[j * n + i];
                // -i a + conj(-i b) = -i a + i conj(b)
                let v = Complex64::new(a.im + b.im, -a.re + b.re);
                out[i * n + j] = v;
                out[j * n + i] = v.conj();
            }
        }
        self.feeds.iter().map(|&(s, rate)| rate * rho[s * n + s].re).sum()
    }
}

/// Working buffers for one RK4 trajectory.
pub(crate) struct Rk4Vector {
    k: [Vec<Complex64>; 4],
    tmp: Vec<Complex64>,
}

impl Rk4Vector {
    pub(crate) fn new(dim: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); dim];
        Self { k: [z.clone(), z.clone(), z.clone(), z.clone()], tmp: z }
    }

    pub(crate) fn step(&mut self, prop: &Propagator, psi: &mut [Complex64], c: [Complex64; 3], dt: f64) {
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        prop.vector_rhs(psi, c[0], k1);
        for i in 0..psi.len() {
            tmp[i] = psi[i] + k1[i] * (0.5 * dt);
        }
        prop.vector_rhs(tmp, c[1], k2);
        for i in 0..psi.len() {
            tmp[i] = psi[i] + k2[i] * (0.5 * dt);
        }
        prop.vector_rhs(tmp, c[1], k3);
        for i in 0..psi.len() {
            tmp[i] = psi[i] + k3[i] * dt;
        }
        prop.vector_rhs(tmp, c[2], k4);
        let s = dt / 6.0;
        for i in 0..psi.len() {
            psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * s;
        }
    }
}

pub(crate) struct Rk4Density {
    k: Vec<Complex64>,
    stage: Vec<Complex64>,
    acc: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Rk4Density {
    pub(crate) fn new(dim: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); dim * dim];
        Self { k: z.clone(), stage: z.clone(), acc: z.clone(), tmp: z }
    }

    /// One step; `lost` receives the integrated feed. Returns the largest
    /// Hermiticity deviation seen before re-Hermitization.
    pub(crate) fn step(
        &mut self,
        prop: &Propagator,
        rho: &mut [Complex64],
        lost: &mut f64,
        c: [Complex64; 3],
        dt: f64,
    ) -> f64 {
        let n = prop.dim;
        let Self { k, stage, acc, tmp } = self;
        let s = dt / 6.0;

        let f1 = prop.density_rhs(rho, c[0], k, stage);
        for i in 0..rho.len() {
            acc[i] = rho[i] + stage[i] * s;
            tmp[i] = rho[i] + stage[i] * (0.5 * dt);
        }
        let f2 = prop.density_rhs(tmp, c[1], k, stage);
        for i in 0..rho.len() {
            acc[i] += stage[i] * (2.0 * s);
            tmp[i] = rho[i] + stage[i] * (0.5 * dt);
        }
        let f3 = prop.density_rhs(tmp, c[1], k, stage);
        for i in 0..rho.len() {
            acc[i] += stage[i] * (2.0 * s);
            tmp[i] = rho[i] + stage[i] * dt;
        }
        let f4 = prop.density_rhs(tmp, c[2], k, stage);
        for i in 0..rho.len() {
            rho[i] = acc[i] + stage[i] * s;
        }
        *lost += (f1 + 2.0 * f2 + 2.0 * f3 + f4) * s;

        let mut dev = 0.0f64;
        for i in 0..n {
            dev = dev.max(rho[i * n + i].im.abs());
            rho[i * n + i].im = 0.0;
            for j in i + 1..n {
                let a = rho[i * n + j];
                let b = rho[j * n + i];
                dev = dev.max((a - b.conj()).norm());
                let h = (a + b.conj()) * 0.5;
                rho[i * n + j] = h;
                rho[j * n + i] = h.conj();
            }
        }
        dev
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_space::build_basis;

    #[test]
    fn step_bound_uses_fastest_scale() {
        let p = PhysicalParams::reference();
        let b = build_basis(2).unwrap();
        let tone = DriveTone::new(7.0, 0.1).unwrap();
        let single = Propagator::new(&p, &[tone], &b, default_frame(&[tone]));
        let expect = STEP_FACTOR / (p.delta_cap() + 7.0);
        assert!((single.max_dt() - expect).abs() < 1e-15);
        let multi = Propagator::new(&p, &[tone, tone], &b, 0.0);
        assert!((multi.max_dt() - STEP_FACTOR / (p.delta_cap() + 7.0)).abs() < 1e-15);
        assert!(matches!(single.check_dt(1.0), Err(CarveError::StepTooLarge { .. })));
        assert!(matches!(single.check_dt(-1.0), Err(CarveError::BadTimeStep(_))));
        assert!(single.check_dt(single.max_dt()).is_ok());
    }

    #[test]
    fn clock_tracks_exact_phase() {
        let tones = vec![Tone { omega: 1.0, freq: 3.7 }, Tone { omega: 0.5, freq: -11.0 }];
        let dt = 1e-3;
        let mut clock = ToneClock::new(tones, 0.25, dt);
        for _ in 0..10_000 {
            clock.advance(0.25);
        }
        let t = 0.25 + 10_000.0 * dt;
        let exact = Complex64::cis(3.7 * t) + Complex64::cis(-11.0 * t) * 0.5;
        assert!((clock.stage_values()[0] - exact).norm() < 1e-10);
    }

    #[test]
    fn density_rhs_is_hermitian_and_trace_free() {
        let p = PhysicalParams::reference();
        let b = build_basis(2).unwrap();
        let tone = DriveTone::new(1.0, 0.3).unwrap();
        let prop = Propagator::new(&p, &[tone], &b, 1.0);
        let n = prop.reduced_dim();
        // Random-ish Hermitian rho.
        let mut rho = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in i..n {
                let v = Complex64::new(((i * 7 + j * 3) % 5) as f64 * 0.01, if i == j { 0.0 } else { 0.003 * (j as f64 - i as f64) });
                rho[i * n + j] = v;
                rho[j * n + i] = v.conj();
            }
        }
        let (mut k, mut out) = (rho.clone(), rho.clone());
        let feed = prop.density_rhs(&rho, Complex64::new(0.3, 0.1), &mut k, &mut out);
        let trace: f64 = (0..n).map(|i| out[i * n + i].re).sum();
        assert!((trace + feed).abs() < 1e-12);
        for i in 0..n {
            for j in 0..n {
                assert_eq!(out[i * n + j], out[j * n + i].conj());
            }
        }
    }
}
