//! Truncated Fourier representations of even probability densities.
//!
//! A density is written `p(theta) = 1 + 2 sum_{l>=1} p_l cos(l theta)`; the
//! zeroth mode is fixed to 1/2 by normalization and never stored.

use crate::error::{ensure_finite, Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Truncated vector of cosine Fourier modes `(p_1 .. p_N)` of an even density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeVector {
    modes: Vec<f64>,
}

impl ModeVector {
    pub fn new(modes: Vec<f64>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidInput("truncation N must be >= 1".into()));
        }
        ensure_finite(&modes, "mode vector")?;
        Ok(Self { modes })
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1);
        Self { modes: vec![0.0; n] }
    }

    /// `eps * e_l` (1-based unit direction scaled by `eps`).
    pub fn unit(n: usize, l: usize, eps: f64) -> Self {
        assert!(l >= 1 && l <= n);
        let mut modes = vec![0.0; n];
        modes[l - 1] = eps;
        Self { modes }
    }

    #[inline]
    pub fn truncation(&self) -> usize {
        self.modes.len()
    }

    /// Mode `p_l` (1-based); zero beyond the truncation.
    #[inline]
    pub fn get(&self, l: usize) -> f64 {
        if l >= 1 && l <= self.modes.len() {
            self.modes[l - 1]
        } else {
            0.0
        }
    }

    #[inline]
    pub fn set(&mut self, l: usize, value: f64) {
        assert!(l >= 1 && l <= self.modes.len());
        self.modes[l - 1] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.modes
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.modes
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.modes
    }

    /// Euclidean norm of the mode vector.
    pub fn norm(&self) -> f64 {
        self.modes.iter().map(|p| p * p).sum::<f64>().sqrt()
    }

    /// Weighted norm `sqrt(sum (1+l^2) p_l^2)` matching the solution-space geometry.
    pub fn weighted_norm(&self) -> f64 {
        self.modes
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let l = i as f64 + 1.0;
                (1.0 + l * l) * p * p
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.modes.iter().fold(0.0, |m, p| m.max(p.abs()))
    }

    /// Resizes by zero-padding or truncating.
    pub fn resized(&self, n: usize) -> Self {
        let mut modes = self.modes.clone();
        modes.resize(n, 0.0);
        Self { modes }
    }
}

/// Density samples on a uniform grid over `[0, 2*pi)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityProfile {
    values: Vec<f64>,
    /// Natural log of the normalization constant `Z = int_0^{2pi} exp(...)`;
    /// `ln(2*pi)` for densities not produced by the fixed-point map.
    log_z: f64,
}

impl DensityProfile {
    pub(crate) fn from_parts(values: Vec<f64>, log_z: f64) -> Self {
        Self { values, log_z }
    }

    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Grid angle `theta_j = 2*pi*j/M`.
    pub fn angle(&self, j: usize) -> f64 {
        TAU * j as f64 / self.values.len() as f64
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    /// Normalization constant `Z`; may overflow to infinity for extreme exponents,
    /// in which case `log_z` remains meaningful.
    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }

    /// Trapezoid value of `(1/2pi) int p`; should be 1 for a valid density.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Max deviation from reflection symmetry `p(theta) = p(-theta)`.
    pub fn asymmetry(&self) -> f64 {
        let m = self.values.len();
        (1..m)
            .map(|j| (self.values[j] - self.values[m - j]).abs())
            .fold(0.0, f64::max)
    }
}
