//! Interaction potentials on the circle, represented by their cosine spectra.
//!
//! Every potential here is even and zero-mean, so it is fully described by the
//! coefficients `a_l` in `W(theta) = sum_l a_l cos(l theta)`.

use crate::error::{ensure_finite, Result};
use serde::{Deserialize, Serialize};

/// Cosine Fourier coefficients of an even, zero-mean interaction potential.
///
/// `coefficients[l-1]` holds `a_l`; coefficients beyond the stored range are
/// treated as zero by every operation. `tail_bound` is an upper bound on
/// `sup_{l > stored} l*|a_l|`, used only for diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpectrum {
    coefficients: Vec<f64>,
    tail_bound: f64,
}

impl PotentialSpectrum {
    pub fn new(coefficients: Vec<f64>, tail_bound: f64) -> Result<Self> {
        ensure_finite(&coefficients, "potential coefficients")?;
        if !tail_bound.is_finite() || tail_bound < 0.0 {
            return Err(crate::error::Error::InvalidInput(format!(
                "tail bound must be finite and nonnegative, got {tail_bound}"
            )));
        }
        Ok(Self { coefficients, tail_bound })
    }

    /// Finitely supported potential: all coefficients beyond the list are exactly zero.
    pub fn finite(coefficients: Vec<f64>) -> Result<Self> {
        Self::new(coefficients, 0.0)
    }

    /// The Kuramoto potential `W = cos(theta)`.
    pub fn kuramoto() -> Self {
        Self { coefficients: vec![1.0], tail_bound: 0.0 }
    }

    /// The log-sine potential `W = -log(2 sin(theta/2))` with `a_l = 1/l`.
    ///
    /// `l |a_l| = 1` for every `l`, so the tail bound is exactly 1.
    pub fn log_sine(stored: usize) -> Self {
        let coefficients = (1..=stored).map(|l| 1.0 / l as f64).collect();
        Self { coefficients, tail_bound: 1.0 }
    }

    /// Coefficient `a_l` (1-based); zero beyond the stored range.
    #[inline]
    pub fn coeff(&self, l: usize) -> f64 {
        if l >= 1 && l <= self.coefficients.len() {
            self.coefficients[l - 1]
        } else {
            0.0
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn stored_len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// `sup_l l*|a_l|` over the stored range combined with the tail bound.
    pub fn sup_l_al(&self) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, a)| (i as f64 + 1.0) * a.abs())
            .fold(self.tail_bound, f64::max)
    }

    /// `sum_l |a_l|` over the stored range; upper-bounds `||W||_inf` up to the tail.
    pub fn sum_abs(&self) -> f64 {
        self.coefficients.iter().map(|a| a.abs()).sum()
    }

    /// Largest coefficient and the set of modes attaining it within relative
    /// tolerance `tol` (used for bifurcation-level coincidence detection).
    pub fn max_coeff(&self) -> Option<(f64, usize)> {
        self.coefficients
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, &a)| (a, i + 1))
    }

    /// Decimated potential `W^(m)` with `a^(m)_l = a_{l m}` (branch lifting for
    /// m-periodic solutions).
    pub fn decimate(&self, m: usize) -> Self {
        assert!(m >= 1, "decimation period must be >= 1");
        let stored = self.coefficients.len() / m;
        let coefficients = (1..=stored).map(|l| self.coeff(l * m)).collect();
        // l |a^{(m)}_l| = (lm/m) |a_{lm}| <= sup_j j|a_j| / m
        Self { coefficients, tail_bound: self.sup_l_al() / m as f64 }
    }

    /// Replaces the coefficients at `modes` by their common level `level`,
    /// leaving all other coefficients untouched. Used to build equalized
    /// surrogate potentials for multi-mode and resonance analysis.
    pub fn equalize(&self, modes: &[usize], level: f64) -> Result<Self> {
        let mut coefficients = self.coefficients.clone();
        for &l in modes {
            if l == 0 || l > coefficients.len() {
                return Err(crate::error::Error::InvalidInput(format!(
                    "mode {l} outside stored range 1..={}",
                    coefficients.len()
                )));
            }
            coefficients[l - 1] = level;
        }
        Self::new(coefficients, self.tail_bound)
    }

    /// Evaluates `W(theta)` from the truncated series.
    pub fn eval(&self, theta: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, a)| a * ((i as f64 + 1.0) * theta).cos())
            .sum()
    }
}
