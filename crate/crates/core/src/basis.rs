//! The orthonormal trigonometric system on [0, 1], the uniform design, and
//! empirical Fourier coefficients.
//!
//! Indexing follows the classical ordering φ₁ = 1, φ₂ = √2 cos 2πt,
//! φ₃ = √2 sin 2πt, φ₄ = √2 cos 4πt, ... so index `k` carries frequency
//! `k / 2` (integer division), even indices are cosines and odd indices
//! `k ≥ 3` are sines.

use std::cell::RefCell;
use std::f64::consts::{PI, SQRT_2};
use std::num::NonZeroUsize;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::ObservationSet;

/// Smallest admissible sample size.
pub const MIN_SAMPLES: usize = 16;

/// A 1-based index into the trigonometric system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisIndex(NonZeroUsize);

impl BasisIndex {
    pub fn new(k: usize) -> Result<Self> {
        NonZeroUsize::new(k)
            .map(BasisIndex)
            .ok_or_else(|| Error::Domain("basis index must be >= 1, got 0".into()))
    }

    pub fn get(self) -> usize {
        self.0.get()
    }

    pub fn frequency(self) -> usize {
        frequency(self.get())
    }

    pub fn is_cosine(self) -> bool {
        self.get() % 2 == 0
    }

    pub fn is_sine(self) -> bool {
        self.get() >= 3 && self.get() % 2 == 1
    }
}

/// Frequency carried by basis index `k ≥ 1`: 0 for the constant, ⌈(k−1)/2⌉ otherwise.
#[inline]
pub fn frequency(k: usize) -> usize {
    k / 2
}

/// The design tᵢ = i/n, i = 1..n. Note that t_n = 1 ≡ 0 (mod 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformGrid {
    n: usize,
}

impl UniformGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_SAMPLES {
            return Err(Error::Domain(format!(
                "sample size must be at least {MIN_SAMPLES}, got {n}"
            )));
        }
        Ok(UniformGrid { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// tᵢ for 1-based `i`.
    pub fn point(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.n).map(move |i| self.point(i))
    }

    /// ⌊n/3⌋, the largest projection level.
    pub fn projection_cap(&self) -> usize {
        self.n / 3
    }

    /// ⌊2n/3⌋, the largest coefficient index any block statistic may touch.
    pub fn block_cap(&self) -> usize {
        2 * self.n / 3
    }
}

/// A finite vector of coefficients c(1), ..., c(L), stored 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CoefficientVector(Vec<f64>);

impl CoefficientVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("coefficient vector must be non-empty".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "coefficient {} is not finite ({})",
                pos + 1,
                values[pos]
            )));
        }
        Ok(CoefficientVector(values))
    }

    /// The unit vector e_k scaled by `value`.
    pub fn unit(k: usize, value: f64) -> Result<Self> {
        let k = BasisIndex::new(k)?.get();
        let mut v = vec![0.0; k];
        v[k - 1] = value;
        Self::new(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// c(k) for 1-based `k`; zero beyond the stored length.
    pub fn get(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.0.get(k - 1).copied().unwrap_or(0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for CoefficientVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<CoefficientVector> for Vec<f64> {
    fn from(c: CoefficientVector) -> Self {
        c.0
    }
}

/// φ_k(t) with t reduced modulo 1.
pub fn eval_basis(k: usize, t: f64) -> Result<f64> {
    let k = BasisIndex::new(k)?;
    Ok(phi(k.get(), t))
}

#[inline]
pub(crate) fn phi(k: usize, t: f64) -> f64 {
    let m = frequency(k);
    if m == 0 {
        return 1.0;
    }
    let angle = 2.0 * PI * (m as f64 * t.rem_euclid(1.0)).rem_euclid(1.0);
    if k % 2 == 0 {
        SQRT_2 * angle.cos()
    } else {
        SQRT_2 * angle.sin()
    }
}

/// φ_k(i/n) with the phase reduced exactly in integer arithmetic.
#[inline]
fn phi_on_grid(k: usize, i: usize, n: usize) -> f64 {
    let m = frequency(k);
    if m == 0 {
        return 1.0;
    }
    let phase = ((m as u128 * i as u128) % n as u128) as f64 / n as f64;
    let angle = 2.0 * PI * phase;
    if k % 2 == 0 {
        SQRT_2 * angle.cos()
    } else {
        SQRT_2 * angle.sin()
    }
}

/// How empirical coefficients are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientMethod {
    /// Direct O(nL) sum; the reference path.
    #[default]
    Direct,
    /// One complex FFT of length n.
    Fast,
}

/// c(k,n) = n⁻¹ Σᵢ y(tᵢ) φ_k(tᵢ) for k = 1..=L, with L ≤ ⌊n/3⌋.
pub fn empirical_coefficients(obs: &ObservationSet, len: usize) -> Result<CoefficientVector> {
    empirical_coefficients_with(obs, len, CoefficientMethod::Direct)
}

pub fn empirical_coefficients_with(
    obs: &ObservationSet,
    len: usize,
    method: CoefficientMethod,
) -> Result<CoefficientVector> {
    let cap = obs.grid().projection_cap();
    if len > cap {
        return Err(Error::Range {
            what: "coefficient count L",
            value: len,
            bound: cap,
        });
    }
    if len == 0 {
        return Err(Error::Domain("coefficient count must be >= 1".into()));
    }
    CoefficientVector::new(grid_coefficients(obs.values(), len, method))
}

/// Empirical coefficients of grid values `y` (y[i−1] observed at tᵢ = i/n).
/// No cap is enforced here; callers bound `len` by ⌊n/3⌋ or ⌊2n/3⌋.
pub(crate) fn grid_coefficients(y: &[f64], len: usize, method: CoefficientMethod) -> Vec<f64> {
    match method {
        CoefficientMethod::Direct => coefficients_direct(y, len),
        CoefficientMethod::Fast => coefficients_fft(y, len),
    }
}

fn coefficients_direct(y: &[f64], len: usize) -> Vec<f64> {
    let n = y.len();
    (1..=len)
        .map(|k| {
            let s: f64 = y
                .iter()
                .enumerate()
                .map(|(idx, &v)| v * phi_on_grid(k, idx + 1, n))
                .sum();
            s / n as f64
        })
        .collect()
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn forward_fft(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

pub(crate) fn inverse_fft(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

fn coefficients_fft(y: &[f64], len: usize) -> Vec<f64> {
    let n = y.len();
    // Position j of the transform input is t = j/n; t = 1 wraps to j = 0.
    let mut buf: Vec<Complex64> = (0..n)
        .map(|j| {
            let v = if j == 0 { y[n - 1] } else { y[j - 1] };
            Complex64::new(v, 0.0)
        })
        .collect();
    forward_fft(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    (1..=len)
        .map(|k| {
            let m = frequency(k);
            let x = buf[m % n];
            if m == 0 {
                x.re * scale
            } else if k % 2 == 0 {
                SQRT_2 * x.re * scale
            } else {
                -SQRT_2 * x.im * scale
            }
        })
        .collect()
}

/// Σ_k coeffs(k) · multipliers(k) · φ_k(t). With no multipliers this
/// evaluates the g-estimate; with multipliers w(k) the f-estimate.
pub fn synthesize(coeffs: &CoefficientVector, multipliers: Option<&[f64]>, t: f64) -> Result<f64> {
    if let Some(w) = multipliers {
        if w.len() < coeffs.len() {
            return Err(Error::Domain(format!(
                "{} multipliers supplied for {} coefficients",
                w.len(),
                coeffs.len()
            )));
        }
    }
    Ok(coeffs
        .as_slice()
        .iter()
        .enumerate()
        .map(|(idx, &c)| {
            let m = multipliers.map_or(1.0, |w| w[idx]);
            c * m * phi(idx + 1, t)
        })
        .sum())
}

/// Σ_k (a(k) − b(k))², the squared L² distance between the represented
/// functions (Parseval). The shorter vector is zero-padded.
pub fn l2_distance_on_spectrum(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().max(b.len());
    (0..len)
        .map(|i| {
            let d = a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0);
            d * d
        })
        .sum()
}
