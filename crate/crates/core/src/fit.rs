//! Least-squares line fits for scaling and decay analysis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CarveError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

impl LinearFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least squares y = intercept + slope x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(CarveError::InvalidParameter {
            name: "points",
            value: x.len().min(y.len()) as f64,
            reason: "need at least two paired points",
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(CarveError::InvalidParameter { name: "points", value: f64::NAN, reason: "must be finite" });
    }
    let n = x.len();
    let design = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { x[i] });
    let rhs = DVector::from_column_slice(y);
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|_| CarveError::InvalidParameter { name: "points", value: n as f64, reason: "degenerate design" })?;
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res = (&design * &coef - &rhs).norm_squared();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(LinearFit { slope: coef[1], intercept: coef[0], r_squared, n_points: n })
}

/// Fit of ln y against x, i.e. y = prefactor e^{slope x}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub slope: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

pub fn exponential_fit(x: &[f64], y: &[f64]) -> Result<ExponentialFit> {
    if let Some(&bad) = y.iter().find(|v| v.is_nan() || **v <= 0.0) {
        return Err(CarveError::InvalidParameter { name: "y", value: bad, reason: "must be positive for a log fit" });
    }
    let logs: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let lin = linear_fit(x, &logs)?;
    Ok(ExponentialFit { slope: lin.slope, prefactor: lin.intercept.exp(), r_squared: lin.r_squared, n_points: lin.n_points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12 && (f.intercept - 3.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!((f.eval(4.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_line_r_squared() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [0.1, 0.9, 2.1, 2.9];
        let f = linear_fit(&x, &y).unwrap();
        assert!(f.r_squared > 0.98 && f.r_squared < 1.0);
    }

    #[test]
    fn exponential() {
        let x = [4.0, 8.0, 12.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 1.9 * (-0.41 * v).exp()).collect();
        let f = exponential_fit(&x, &y).unwrap();
        assert!((f.slope + 0.41).abs() < 1e-12 && (f.prefactor - 1.9).abs() < 1e-12);
        assert!(exponential_fit(&x, &[1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn rejects_short_or_degenerate() {
        assert!(linear_fit(&[1.0], &[1.0]).is_err());
        assert!(linear_fit(&[1.0, 2.0], &[1.0]).is_err());
    }
}
