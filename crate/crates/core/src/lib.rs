//! Adaptive spectral-cutoff estimation for periodic deconvolution from noisy
//! samples on a uniform grid.
//!
//! Observations y(tᵢ) = g(tᵢ) + σεᵢ at tᵢ = i/n are expanded in the real
//! trigonometric basis; the solution f has coefficients c(k)w(k), where w is
//! the reciprocal kernel spectrum. The crate provides the projection
//! estimator, data-driven truncation rules, energy estimation, confidence
//! regions and a Monte Carlo harness.

pub mod basis;
pub mod error;
pub mod harness;
pub mod estimators;
pub mod inference;
pub mod io;
pub mod signal;
pub mod simulate;
pub mod special;
pub mod spectrum;

pub use basis::{BasisIndex, CoefficientVector, UniformGrid};
pub use error::{Error, Result};
pub use estimators::{AdaptiveSelection, EstimateReport, PenaltyOptions, SigmaUsed};
pub use signal::{SignPattern, SignalSpec, SignalSpectrum};
pub use simulate::{NoiseModel, ObservationSet};
pub use spectrum::{KernelSpec, WeightSequence};
