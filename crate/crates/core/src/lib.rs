//! Spectral solver and bifurcation-analysis toolkit for stationary
//! McKean-Vlasov equations on the circle.
//!
//! The stationary equation `d^2p/dtheta^2 = kappa d/dtheta (p d/dtheta (W*p))`
//! is solved in Fourier space, where it becomes a quadratic system over the
//! cosine modes of the density. On top of that representation the crate
//! provides Newton/pseudo-arclength branch continuation, bifurcation detection
//! and classification, free-energy landscape scans with transition-point
//! classification, and an interacting-particle simulator for cross-validation.

pub mod bessel;
pub mod bifurcation;
pub mod continuation;
pub mod energy;
pub mod error;
pub mod modes;
pub mod particle;
pub mod potential;
pub mod spectral;

pub use error::{Error, Result};
pub use modes::{DensityProfile, ModeVector};
pub use potential::PotentialSpectrum;
