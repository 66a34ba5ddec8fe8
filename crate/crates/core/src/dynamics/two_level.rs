//! Two neighbouring Dicke levels in the dressed-state picture.
//!
//! Each level m in {n, n+1} is a ground dressed state coupled at w to a
//! one-photon dressed state of width 2 kappa. The tone sits on level n, so the
//! photon state of n+1 is offset by d = kappa sqrt(C/n). Propagation uses the
//! exact exponential of each 2x2 no-jump generator.

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::error::{CarveError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelModel {
    pub kappa: f64,
    pub c_over_n: f64,
    /// Drive strength relative to kappa.
    pub w_over_kappa: f64,
}

/// Result of one heralding window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelRun {
    pub duration: f64,
    /// Populations of the two ground dressed states (driven level first).
    pub remaining: [f64; 2],
    /// Probability that each level emitted (decayed out of its photon state).
    pub emitted: [f64; 2],
}

impl TwoLevelRun {
    /// Counter-factual heralding keeps the non-emitting branch; target is n+1.
    pub fn counterfactual_infidelity(&self) -> f64 {
        self.remaining[0] / (self.remaining[0] + self.remaining[1])
    }

    pub fn success_probability(&self) -> f64 {
        self.remaining[0] + self.remaining[1]
    }

    /// Factual heralding keeps the emitting branch; target is n.
    pub fn factual_infidelity(&self) -> f64 {
        self.emitted[1] / (self.emitted[0] + self.emitted[1])
    }
}

impl TwoLevelModel {
    pub fn new(kappa: f64, c_over_n: f64, w_over_kappa: f64) -> Result<Self> {
        for (name, v) in [("kappa", kappa), ("w_over_kappa", w_over_kappa)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CarveError::InvalidParameter { name, value: v, reason: "must be positive" });
            }
        }
        if !(c_over_n.is_finite() && c_over_n >= 0.0) {
            return Err(CarveError::InvalidParameter {
                name: "c_over_n",
                value: c_over_n,
                reason: "must be non-negative",
            });
        }
        Ok(Self { kappa, c_over_n, w_over_kappa })
    }

    pub fn linewidth(&self) -> f64 {
        2.0 * self.kappa
    }

    pub fn shift(&self) -> f64 {
        self.kappa * self.c_over_n.sqrt()
    }

    pub fn w(&self) -> f64 {
        self.w_over_kappa * self.kappa
    }

    /// Lorentzian decay rates of the driven level and its neighbour.
    pub fn predicted_rates(&self) -> [f64; 2] {
        let k = self.linewidth();
        let w2 = self.w() * self.w();
        let resonant = 4.0 * w2 / k;
        [resonant, resonant / (1.0 + (2.0 * self.shift() / k).powi(2))]
    }

    fn generator(&self, offset: f64) -> Matrix2<Complex64> {
        let w = Complex64::new(self.w(), 0.0);
        Matrix2::new(
            Complex64::new(0.0, 0.0),
            w,
            w,
            Complex64::new(offset, -0.5 * self.linewidth()),
        )
    }

    /// Starts both ground states with probability 1/2 and evolves for `duration`.
    pub fn run(&self, duration: f64) -> TwoLevelRun {
        let mut remaining = [0.0; 2];
        let mut emitted = [0.0; 2];
        for (i, offset) in [0.0, -self.shift()].into_iter().enumerate() {
            let u = (self.generator(offset) * Complex64::new(0.0, -duration)).exp();
            let ground = u[(0, 0)].norm_sqr() * 0.5;
            let photon = u[(1, 0)].norm_sqr() * 0.5;
            remaining[i] = ground;
            emitted[i] = 0.5 - ground - photon;
        }
        TwoLevelRun { duration, remaining, emitted }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_match_exponential_decay() {
        let model = TwoLevelModel::new(1.0, 9.0, 1.0 / 50.0).unwrap();
        let [g0, g1] = model.predicted_rates();
        let a = model.run(1.0 / g0);
        let b = model.run(2.0 / g0);
        let fitted = (a.remaining[0] / b.remaining[0]).ln() * g0;
        assert!((fitted / g0 - 1.0).abs() < 0.02);
        let a = model.run(1.0 / g1);
        let b = model.run(2.0 / g1);
        let fitted = (a.remaining[1] / b.remaining[1]).ln() * g1;
        assert!((fitted / g1 - 1.0).abs() < 0.02);
    }

    #[test]
    fn zero_contrast_gives_half() {
        let model = TwoLevelModel::new(1.0, 0.0, 0.02).unwrap();
        let r = model.run(10.0);
        assert!((r.counterfactual_infidelity() - 0.5).abs() < 1e-12);
        assert!((r.factual_infidelity() - 0.5).abs() < 1e-12);
    }
}
