//! True-signal models and the oracle quantities computed from them:
//! bias tails ρ(N), ρ₂(N), the tail ratio γ, the search cap N⁺ and the
//! oracle risk curve A(N, n).
//!
//! Power-law spectra use the same frequency pairing as the kernel:
//! c(k) = C₁ · s(k) · max(frequency(k), 1)^{−Δ}. Their infinite tails are
//! evaluated in closed form through the Hurwitz zeta function.

use serde::{Deserialize, Serialize};

use crate::basis::frequency;
use crate::error::{Error, Result};
use crate::special::hurwitz_zeta;
use crate::spectrum::{KernelSpec, Limit, WeightSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignPattern {
    #[default]
    AllPositive,
    /// s(k) = (−1)^{frequency(k)}.
    Alternating,
}

/// Signal block of an experiment configuration. Coefficients are those of
/// g = R * f; the solution f has coefficients c(k)·w(k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    PowerLaw {
        delta: f64,
        scale: f64,
        #[serde(default)]
        signs: SignPattern,
    },
    Explicit {
        values: Vec<f64>,
    },
    TrigPoly {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpectrum {
    spec: SignalSpec,
}

impl SignalSpectrum {
    pub fn new(spec: SignalSpec) -> Result<Self> {
        match &spec {
            SignalSpec::PowerLaw { delta, scale, .. } => {
                if !delta.is_finite() || *delta <= 0.5 {
                    return Err(Error::config("signal.delta", format!("must be finite and > 1/2, got {delta}")));
                }
                if !scale.is_finite() || *scale == 0.0 {
                    return Err(Error::config("signal.scale", format!("must be finite and non-zero, got {scale}")));
                }
            }
            SignalSpec::Explicit { values } | SignalSpec::TrigPoly { values } => {
                if values.is_empty() {
                    return Err(Error::config("signal.values", "must be non-empty"));
                }
                if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::config("signal.values", format!("entry {} is not finite", pos + 1)));
                }
            }
        }
        Ok(SignalSpectrum { spec })
    }

    pub fn power_law(delta: f64, scale: f64, signs: SignPattern) -> Result<Self> {
        Self::new(SignalSpec::PowerLaw { delta, scale, signs })
    }

    pub fn trig_poly(values: Vec<f64>) -> Result<Self> {
        Self::new(SignalSpec::TrigPoly { values })
    }

    pub fn zero() -> Self {
        SignalSpectrum {
            spec: SignalSpec::TrigPoly { values: vec![0.0] },
        }
    }

    pub fn spec(&self) -> &SignalSpec {
        &self.spec
    }

    /// c(k) for 1-based `k`.
    pub fn c(&self, k: usize) -> f64 {
        assert!(k >= 1, "coefficient index must be >= 1");
        match &self.spec {
            SignalSpec::PowerLaw { delta, scale, signs } => {
                let m = frequency(k);
                let sign = match signs {
                    SignPattern::AllPositive => 1.0,
                    SignPattern::Alternating if m % 2 == 1 => -1.0,
                    SignPattern::Alternating => 1.0,
                };
                sign * scale * (m.max(1) as f64).powf(-delta)
            }
            SignalSpec::Explicit { values } | SignalSpec::TrigPoly { values } => {
                values.get(k - 1).copied().unwrap_or(0.0)
            }
        }
    }

    pub fn coefficients(&self, len: usize) -> Vec<f64> {
        (1..=len).map(|k| self.c(k)).collect()
    }

    /// Largest index with a non-zero coefficient (0 for the zero signal);
    /// `None` for infinite spectra.
    pub fn support(&self) -> Option<usize> {
        match &self.spec {
            SignalSpec::PowerLaw { .. } => None,
            SignalSpec::Explicit { values } | SignalSpec::TrigPoly { values } => {
                Some(values.iter().rposition(|v| *v != 0.0).map_or(0, |p| p + 1))
            }
        }
    }

    /// Decay exponent Δ for power-law spectra.
    pub fn delta(&self) -> Option<f64> {
        match &self.spec {
            SignalSpec::PowerLaw { delta, .. } => Some(*delta),
            _ => None,
        }
    }

    /// f-coefficients c(k)·w(k) for k = 1..=len.
    pub fn solution_coefficients(&self, weights: &WeightSequence, len: usize) -> Vec<f64> {
        (1..=len).map(|k| self.c(k) * weights.w(k)).collect()
    }
}

/// Closed-form description of a power-law kernel: (θ, C₂).
fn power_kernel(weights: &WeightSequence) -> Option<(f64, f64)> {
    match weights.spec() {
        KernelSpec::PowerLaw { theta, scale } => Some((*theta, *scale)),
        KernelSpec::Identity => Some((0.0, 1.0)),
        KernelSpec::Explicit { .. } => None,
    }
}

/// Σ_{k ≥ start} max(frequency(k), 1)^{−e}, for e > 1.
fn paired_tail(start: usize, e: f64) -> f64 {
    debug_assert!(e > 1.0);
    match start {
        0 | 1 => 1.0 + paired_tail(2, e),
        a if a % 2 == 0 => 2.0 * hurwitz_zeta(e, (a / 2) as f64),
        a => {
            let m = (a / 2) as f64;
            m.powf(-e) + 2.0 * hurwitz_zeta(e, m + 1.0)
        }
    }
}

/// Checks that the tail sums ρ(N) are finite and computable for this pair.
pub fn validate_pairing(sig: &SignalSpectrum, weights: &WeightSequence) -> Result<()> {
    match (&sig.spec, power_kernel(weights)) {
        (SignalSpec::PowerLaw { delta, .. }, Some((theta, _))) => {
            if *delta <= theta + 0.5 {
                return Err(Error::Model(format!(
                    "power-law signal with delta = {delta} has infinite energy against theta = {theta}; need delta > theta + 1/2"
                )));
            }
            Ok(())
        }
        (SignalSpec::PowerLaw { .. }, None) => Err(Error::Model(
            "a power-law signal needs a power-law or identity kernel; explicit weight lists cannot carry its infinite tail".into(),
        )),
        (_, _) => weights.ensure_covers(sig.support().unwrap_or(0).max(1)),
    }
}

/// Additionally checks Δ > 2θ + 1/2, under which ‖f‖_{B(w)} is finite and
/// the adaptive rules apply.
pub fn validate_adaptive(sig: &SignalSpectrum, weights: &WeightSequence) -> Result<()> {
    validate_pairing(sig, weights)?;
    if let (Some(delta), Some((theta, _))) = (sig.delta(), power_kernel(weights)) {
        if delta <= 2.0 * theta + 0.5 {
            return Err(Error::config(
                "signal.delta",
                format!("adaptive estimation needs delta > 2*theta + 1/2 = {}, got {delta}", 2.0 * theta + 0.5),
            ));
        }
    }
    Ok(())
}

/// Σ_{k > start−1} c²(k) w^{2·power}(k) for `power` ∈ {1, 2}.
fn weighted_tail(sig: &SignalSpectrum, weights: &WeightSequence, start: usize, power: i32) -> Result<f64> {
    validate_pairing(sig, weights)?;
    match &sig.spec {
        SignalSpec::PowerLaw { delta, scale, .. } => {
            let (theta, c2) = power_kernel(weights).expect("validated pairing");
            let e = 2.0 * delta - 2.0 * power as f64 * theta;
            if e <= 1.0 {
                return Err(Error::Model(format!(
                    "tail sum of c^2 w^{} diverges for delta = {delta}, theta = {theta}",
                    2 * power
                )));
            }
            Ok(scale * scale * c2.powi(2 * power) * paired_tail(start, e))
        }
        SignalSpec::Explicit { .. } | SignalSpec::TrigPoly { .. } => {
            let len = sig.support().unwrap_or(0);
            Ok((start.max(1)..=len)
                .map(|k| sig.c(k).powi(2) * weights.w(k).powi(2 * power))
                .sum())
        }
    }
}

/// ρ(N) = Σ_{k=N+1}^{∞} c²(k) w²(k).
pub fn rho(sig: &SignalSpectrum, weights: &WeightSequence, n: usize) -> Result<f64> {
    weighted_tail(sig, weights, n + 1, 1)
}

/// ρ₂(N) = Σ_{k=N+1}^{2N} c²(k) w⁴(k).
pub fn rho2(sig: &SignalSpectrum, weights: &WeightSequence, n: usize) -> Result<f64> {
    let end = match sig.support() {
        Some(len) => (2 * n).min(len),
        None => 2 * n,
    };
    weights.ensure_covers(end)?;
    Ok((n + 1..=end)
        .map(|k| sig.c(k).powi(2) * weights.w(k).powi(4))
        .sum())
}

/// H(f) = ‖f‖² = Σ c²(k) w²(k).
pub fn energy(sig: &SignalSpectrum, weights: &WeightSequence) -> Result<f64> {
    rho(sig, weights, 0)
}

/// ‖f‖²_{B(w)} = Σ c²(k) w⁴(k).
pub fn b_norm_sq(sig: &SignalSpectrum, weights: &WeightSequence) -> Result<f64> {
    weighted_tail(sig, weights, 1, 2)
}

/// γ = lim ρ(2N)/ρ(N).
pub fn gamma_limit(sig: &SignalSpectrum, weights: &WeightSequence) -> Limit {
    match (sig.delta(), power_kernel(weights)) {
        (Some(delta), Some((theta, _))) => Limit::Analytic {
            value: 2f64.powf(-(2.0 * delta - 2.0 * theta - 1.0)),
        },
        _ => {
            let diagnostic = sig.support().and_then(|len| {
                let n = len / 4;
                if n == 0 {
                    return None;
                }
                let base = rho(sig, weights, n).ok()?;
                (base > 0.0).then(|| rho(sig, weights, 2 * n).ok().map(|r| r / base)).flatten()
            });
            Limit::Unavailable { diagnostic }
        }
    }
}

/// N⁺ = min[Ent(n/ln(n+8)), Ent((n/ln(n+8))^{1/(2θ)}), ⌊n/3⌋]; the second
/// term is absent for θ = 0.
pub fn n_plus(n: usize, weights: &WeightSequence) -> usize {
    let base = n as f64 / ((n + 8) as f64).ln();
    let theta = weights.theta();
    let first = base.floor() as usize;
    let second = if theta > 0.0 {
        base.powf(1.0 / (2.0 * theta)).floor() as usize
    } else {
        usize::MAX
    };
    first.min(second).min(n / 3).max(1)
}

/// The oracle risk curve and its minimiser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRisk {
    pub n_plus: usize,
    /// A(N, n) for N = 1..=N⁺ (index N−1).
    pub a_curve: Vec<f64>,
    pub a_star: f64,
    pub n0: usize,
    /// U(γ₋, Γ₋) = min(1 − γ₋, Γ₋ − 1), when both limits are known.
    pub u: Option<f64>,
}

impl OracleRisk {
    pub fn a(&self, n: usize) -> f64 {
        self.a_curve[n - 1]
    }
}

/// A(N, n) = σ² S(N)/n + ρ(N) over N ∈ [1, N⁺], with A* its minimum and
/// N₀ the smallest minimiser.
pub fn oracle_risk(sig: &SignalSpectrum, weights: &WeightSequence, n: usize, sigma: f64) -> Result<OracleRisk> {
    if n < crate::basis::MIN_SAMPLES {
        return Err(Error::Domain(format!("sample size must be at least 16, got {n}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("noise scale must be finite and >= 0, got {sigma}")));
    }
    let np = n_plus(n, weights);
    weights.ensure_covers(np)?;
    let s = weights.prefix_sum_sq(np);
    let a_curve = (1..=np)
        .map(|big_n| Ok(sigma * sigma * s[big_n - 1] / n as f64 + rho(sig, weights, big_n)?))
        .collect::<Result<Vec<f64>>>()?;
    let (idx, a_star) = crate::estimators::argmin_first(&a_curve, 0.0);
    let u = match (gamma_limit(sig, weights).analytic(), weights.growth_ratio_lower()) {
        (Some(gamma), Some((big_gamma, _))) => Some((1.0 - gamma).min(big_gamma - 1.0)),
        _ => None,
    };
    Ok(OracleRisk {
        n_plus: np,
        a_curve,
        a_star,
        n0: idx + 1,
        u,
    })
}

/// ‖f̂ − f‖² for an estimate with f-coefficients `estimate` (index 1 first):
/// the in-band spectral distance plus the exact tail ρ(L).
pub fn l2_error(sig: &SignalSpectrum, weights: &WeightSequence, estimate: &[f64]) -> Result<f64> {
    weights.ensure_covers(estimate.len())?;
    let in_band: f64 = estimate
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let d = e - sig.c(i + 1) * weights.w(i + 1);
            d * d
        })
        .sum();
    Ok(in_band + rho(sig, weights, estimate.len())?)
}
