//! Coordinate-format sparse operators on the joint space.
//!
//! Hamiltonians here have at most three non-zeros per row, so builders emit
//! entries directly and only densify for diagnostics or small exact solves.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    entries: BTreeMap<(usize, usize), Complex64>,
}

impl SparseOperator {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Accumulates `value` onto entry (row, col). Exact zeros are not stored.
    pub fn add(&mut self, row: usize, col: usize, value: Complex64) {
        assert!(row < self.dim && col < self.dim, "entry ({row}, {col}) outside dim {}", self.dim);
        let slot = self.entries.entry((row, col)).or_insert(Complex64::new(0.0, 0.0));
        *slot += value;
        if *slot == Complex64::new(0.0, 0.0) {
            self.entries.remove(&(row, col));
        }
    }

    /// Adds `value` at (row, col) and its conjugate at (col, row).
    pub fn add_hermitian_pair(&mut self, row: usize, col: usize, value: Complex64) {
        if row == col {
            self.add(row, col, Complex64::new(value.re, 0.0));
        } else {
            self.add(row, col, value);
            self.add(col, row, value.conj());
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries.get(&(row, col)).copied().unwrap_or_default()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        self.entries.iter().map(|(&(r, c), &v)| (r, c, v))
    }

    pub fn count_value(&self, value: Complex64) -> usize {
        self.entries.values().filter(|&&v| v == value).count()
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for (r, c, v) in self.iter() {
            out.entries.insert((c, r), v.conj());
        }
        out
    }

    pub fn sum(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (r, c, v) in other.iter() {
            out.add(r, c, v);
        }
        out
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = Self::zeros(self.dim);
        for (r, c, v) in self.iter() {
            out.add(r, c, v * factor);
        }
        out
    }

    /// Largest |A_ij - conj(A_ji)| over all entries.
    pub fn hermiticity_deviation(&self) -> f64 {
        self.iter()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        assert_eq!(v.len(), self.dim);
        let mut out = DVector::zeros(self.dim);
        for (r, c, a) in self.iter() {
            out[r] += a * v[c];
        }
        out
    }

    /// Expectation value <v|A|v> (unnormalized).
    pub fn expectation(&self, v: &DVector<Complex64>) -> Complex64 {
        v.dotc(&self.apply(v))
    }
}
