//! Kernel spectra w(k), their partial sums, and modular weight norms.

use serde::{Deserialize, Serialize};

use crate::basis::frequency;
use crate::error::{Error, Result};

/// Kernel block of an experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// w(k) = scale · max(frequency(k), 1)^theta.
    PowerLaw { theta: f64, scale: f64 },
    /// w(k) = values[k−1]; `theta` optionally declares the growth exponent
    /// used for the search cap (0 when absent).
    Explicit {
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<f64>,
    },
    /// w ≡ 1 (direct regression).
    Identity,
}

/// A limit ratio that is either known in closed form or only estimable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Limit {
    Analytic { value: f64 },
    /// No limit can be derived from finite data; `diagnostic` is the ratio at
    /// the largest representable scale, when one exists.
    Unavailable { diagnostic: Option<f64> },
}

impl Limit {
    pub fn analytic(&self) -> Option<f64> {
        match *self {
            Limit::Analytic { value } => Some(value),
            Limit::Unavailable { .. } => None,
        }
    }

    /// The analytic value, or else the empirical diagnostic.
    pub fn best_available(&self) -> Option<(f64, Provenance)> {
        match *self {
            Limit::Analytic { value } => Some((value, Provenance::Analytic)),
            Limit::Unavailable { diagnostic } => diagnostic.map(|d| (d, Provenance::Empirical)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Empirical,
    Supplied,
}

/// The kernel spectrum w(k), k ≥ 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSequence {
    spec: KernelSpec,
}

impl WeightSequence {
    pub fn new(spec: KernelSpec) -> Result<Self> {
        match &spec {
            KernelSpec::PowerLaw { theta, scale } => {
                if !theta.is_finite() || *theta < 0.0 {
                    return Err(Error::config("kernel.theta", format!("must be finite and >= 0, got {theta}")));
                }
                if !scale.is_finite() || *scale <= 0.0 {
                    return Err(Error::config("kernel.scale", format!("must be finite and > 0, got {scale}")));
                }
            }
            KernelSpec::Explicit { values, theta } => {
                if values.is_empty() {
                    return Err(Error::config("kernel.values", "must be non-empty"));
                }
                if let Some(pos) = values.iter().position(|v| !v.is_finite() || *v == 0.0) {
                    return Err(Error::config(
                        "kernel.values",
                        format!("entry {} is {}; weights must be finite with inf |w(k)| > 0", pos + 1, values[pos]),
                    ));
                }
                if let Some(t) = theta {
                    if !t.is_finite() || *t < 0.0 {
                        return Err(Error::config("kernel.theta", format!("must be finite and >= 0, got {t}")));
                    }
                }
            }
            KernelSpec::Identity => {}
        }
        Ok(WeightSequence { spec })
    }

    pub fn power_law(theta: f64, scale: f64) -> Result<Self> {
        Self::new(KernelSpec::PowerLaw { theta, scale })
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        Self::new(KernelSpec::Explicit { values, theta: None })
    }

    pub fn identity() -> Self {
        WeightSequence { spec: KernelSpec::Identity }
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// w(k) for 1-based `k`.
    ///
    /// Panics if `k` is 0 or lies beyond an explicit list; use
    /// [`WeightSequence::ensure_covers`] first when the length is not known.
    pub fn w(&self, k: usize) -> f64 {
        assert!(k >= 1, "weight index must be >= 1");
        match &self.spec {
            KernelSpec::PowerLaw { theta, scale } => {
                if *theta == 0.0 {
                    *scale
                } else {
                    scale * (frequency(k).max(1) as f64).powf(*theta)
                }
            }
            KernelSpec::Explicit { values, .. } => match values.get(k - 1) {
                Some(v) => *v,
                None => panic!("weight index {k} beyond explicit list of length {}", values.len()),
            },
            KernelSpec::Identity => 1.0,
        }
    }

    /// w(1), ..., w(len).
    pub fn values(&self, len: usize) -> Vec<f64> {
        (1..=len).map(|k| self.w(k)).collect()
    }

    /// Number of defined weights, `None` when the sequence is infinite.
    pub fn support(&self) -> Option<usize> {
        match &self.spec {
            KernelSpec::Explicit { values, .. } => Some(values.len()),
            _ => None,
        }
    }

    pub fn ensure_covers(&self, k: usize) -> Result<()> {
        match self.support() {
            Some(len) if len < k => Err(Error::Model(format!(
                "explicit kernel supplies {len} weights but index {k} is required"
            ))),
            _ => Ok(()),
        }
    }

    /// The growth exponent θ with |w(k)| ≍ k^θ.
    pub fn theta(&self) -> f64 {
        match &self.spec {
            KernelSpec::PowerLaw { theta, .. } => *theta,
            KernelSpec::Explicit { theta, .. } => theta.unwrap_or(0.0),
            KernelSpec::Identity => 0.0,
        }
    }

    /// Whether w ≡ 1, i.e. the problem is plain regression.
    pub fn is_identity(&self) -> bool {
        match &self.spec {
            KernelSpec::Identity => true,
            KernelSpec::PowerLaw { theta, scale } => *theta == 0.0 && *scale == 1.0,
            KernelSpec::Explicit { values, .. } => values.iter().all(|v| *v == 1.0),
        }
    }

    /// S(N) = Σ_{k=1}^{N} w²(k).
    pub fn sum_sq(&self, n: usize) -> f64 {
        (1..=n).map(|k| self.w(k).powi(2)).sum()
    }

    /// [S(1), ..., S(upto)] as a running sum.
    pub fn prefix_sum_sq(&self, upto: usize) -> Vec<f64> {
        (1..=upto)
            .scan(0.0, |acc, k| {
                *acc += self.w(k).powi(2);
                Some(*acc)
            })
            .collect()
    }

    /// S₂(N) = Σ_{k=N+1}^{2N} w⁴(k).
    pub fn block_sum_fourth(&self, n: usize) -> f64 {
        (n + 1..=2 * n).map(|k| self.w(k).powi(4)).sum()
    }

    /// Σ_{k=1}^{N} w⁴(k).
    pub fn sum_fourth(&self, n: usize) -> f64 {
        (1..=n).map(|k| self.w(k).powi(4)).sum()
    }

    /// Γ = lim S(2N)/S(N).
    pub fn growth_ratio(&self) -> Limit {
        match &self.spec {
            KernelSpec::PowerLaw { theta, .. } => Limit::Analytic {
                value: 2f64.powf(2.0 * theta + 1.0),
            },
            KernelSpec::Identity => Limit::Analytic { value: 2.0 },
            KernelSpec::Explicit { values, .. } => {
                let half = values.len() / 2;
                let diagnostic = (half >= 1).then(|| self.sum_sq(2 * half) / self.sum_sq(half));
                Limit::Unavailable { diagnostic }
            }
        }
    }

    /// Γ₋, taken equal to Γ for closed-form kernels and to the empirical
    /// ratio for explicit lists.
    pub fn growth_ratio_lower(&self) -> Option<(f64, Provenance)> {
        self.growth_ratio().best_available()
    }
}

/// The modular norm ‖·‖_{B(p,w)}.
#[derive(Debug, Clone)]
pub struct ModularNorm<'a> {
    p: f64,
    weights: &'a WeightSequence,
}

impl<'a> ModularNorm<'a> {
    pub fn new(p: f64, weights: &'a WeightSequence) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::Domain(format!("modular exponent p must lie in (1, inf), got {p}")));
        }
        Ok(ModularNorm { p, weights })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

/// (Σ_k |w(k)|^p |c(k)|^p)^{2/p}; for p = 2 exactly Σ w²(k)c²(k).
///
/// ‖f‖²_{B(w)} = Σ c²(k) w⁴(k) is obtained by passing a norm whose weights
/// are w².
pub fn modular_norm_sq(coeffs: &[f64], norm: &ModularNorm<'_>) -> Result<f64> {
    norm.weights.ensure_covers(coeffs.len())?;
    let p = norm.p;
    let s: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| (norm.weights.w(i + 1).abs() * c.abs()).powf(p))
        .sum();
    Ok(if p == 2.0 { s } else { s.powf(2.0 / p) })
}
