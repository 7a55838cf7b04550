//! Projection estimates and the data-driven truncation rules: the dyadic
//! block statistic τ, the adaptive cutoff M(n), its penalized refinement
//! M₁(n) with the γ(n) plug-in, the modular-space rule M⁽ᵖ⁾(n), and the
//! g-first plug-in cutoff N₁(n).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::{self, CoefficientMethod, CoefficientVector};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, fmt_opt, write_atomic, write_json};
use crate::signal::{self, SignalSpectrum};
use crate::simulate::{self, ObservationSet};
use crate::spectrum::{Provenance, WeightSequence};

/// Values within this fraction of a curve's largest magnitude count as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Upper clamp for the plug-in γ(n) before it enters the penalty.
pub const GAMMA_CLAMP_MAX: f64 = 0.99;

/// Smallest index whose value is within `rel_tol · max|curve|` of the
/// minimum, with that value. Panics on an empty curve.
pub fn argmin_first(curve: &[f64], rel_tol: f64) -> (usize, f64) {
    assert!(!curve.is_empty(), "argmin of an empty curve");
    let min = curve.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = curve.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let threshold = min + rel_tol * scale;
    let idx = curve.iter().position(|&v| v <= threshold).unwrap_or(0);
    (idx, curve[idx])
}

/// Empirical coefficients c(k,n) up to the block cap ⌊2n/3⌋, the range every
/// selector draws from.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSpectrum {
    n: usize,
    coeffs: Vec<f64>,
}

impl EmpiricalSpectrum {
    pub fn new(obs: &ObservationSet) -> Self {
        let cap = obs.grid().block_cap();
        EmpiricalSpectrum {
            n: obs.n(),
            coeffs: basis::grid_coefficients(obs.values(), cap, CoefficientMethod::Fast),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Highest available index, ⌊2n/3⌋.
    pub fn cap(&self) -> usize {
        self.coeffs.len()
    }

    /// c(k,n), 1-based; panics beyond the cap.
    pub fn c(&self, k: usize) -> f64 {
        self.coeffs[k - 1]
    }

    /// f̂ coefficients c(k,n)·w(k) for k ≤ len.
    pub fn solution_coefficients(&self, weights: &WeightSequence, len: usize) -> Vec<f64> {
        (1..=len).map(|k| self.c(k) * weights.w(k)).collect()
    }

    /// Σ_{k=N+1}^{2N} |w(k) c(k,n)|^p.
    fn block(&self, weights: Option<&WeightSequence>, big_n: usize, p: f64) -> f64 {
        ((big_n + 1)..=(2 * big_n))
            .map(|k| {
                let wc = (weights.map_or(1.0, |w| w.w(k)) * self.c(k)).abs();
                if p == 2.0 {
                    wc * wc
                } else {
                    wc.powf(p)
                }
            })
            .sum()
    }

    fn check_block(&self, big_n: usize) -> Result<()> {
        if big_n == 0 {
            return Err(Error::Domain("truncation must be >= 1".into()));
        }
        if 2 * big_n > self.cap() {
            return Err(Error::Range {
                what: "block statistic index 2N",
                value: 2 * big_n,
                bound: self.cap(),
            });
        }
        Ok(())
    }

    /// τ(N,n) = Σ_{k=N+1}^{2N} w²(k) c²(k,n).
    pub fn tau(&self, weights: &WeightSequence, big_n: usize) -> Result<f64> {
        self.check_block(big_n)?;
        weights.ensure_covers(2 * big_n)?;
        Ok(self.block(Some(weights), big_n, 2.0))
    }

    fn curve(&self, weights: Option<&WeightSequence>, upto: usize, p: f64) -> Result<Vec<f64>> {
        self.check_block(upto)?;
        if let Some(w) = weights {
            w.ensure_covers(2 * upto)?;
        }
        Ok((1..=upto).map(|big_n| self.block(weights, big_n, p)).collect())
    }

    /// M(n) = argmin τ(N,n) over N ∈ [1, N⁺].
    pub fn select_adaptive(&self, weights: &WeightSequence) -> Result<AdaptiveSelection> {
        let np = signal::n_plus(self.n, weights);
        let tau_curve = self.curve(Some(weights), np, 2.0)?;
        Ok(AdaptiveSelection::plain(self.n, np, tau_curve, 2.0))
    }

    /// γ(n) = (τ(4G) − 2τ(2G)) / (τ(2G) − 2τ(G)) with G = Ent(exp(√ln n)).
    pub fn estimate_gamma(&self, weights: &WeightSequence) -> Result<GammaEstimate> {
        let g = gamma_block(self.n);
        if 8 * g > self.cap() {
            return Err(Error::Precondition(format!(
                "n too small for gamma plug-in: n = {} gives G = {g}, needing 8G = {} <= floor(2n/3) = {}",
                self.n,
                8 * g,
                self.cap()
            )));
        }
        let t1 = self.tau(weights, g)?;
        let t2 = self.tau(weights, 2 * g)?;
        let t4 = self.tau(weights, 4 * g)?;
        Ok(GammaEstimate {
            gamma_hat: (t4 - 2.0 * t2) / (t2 - 2.0 * t1),
            g,
        })
    }

    /// M₁(n) = argmin over [1, N⁺] of τ₁(N,n) = τ(N,n) + (2 − γ(n) − Γ)σ²S(N)/n.
    pub fn select_penalized(
        &self,
        weights: &WeightSequence,
        sigma: SigmaUsed,
        opts: &PenaltyOptions,
    ) -> Result<AdaptiveSelection> {
        let mut sel = self.select_adaptive(weights)?;
        let (big_gamma, big_gamma_source) = match opts.big_gamma {
            Some(v) => (v, Provenance::Supplied),
            None => {
                let limit = weights.growth_ratio();
                match (limit.analytic(), opts.accept_empirical_big_gamma) {
                    (Some(v), _) => (v, Provenance::Analytic),
                    (None, true) => limit.best_available().ok_or_else(|| {
                        Error::Precondition("sum ratio Gamma has no empirical diagnostic for this kernel".into())
                    })?,
                    (None, false) => {
                        return Err(Error::Precondition(
                            "sum ratio Gamma is not analytic for this kernel; supply penalty.big_gamma".into(),
                        ))
                    }
                }
            }
        };

        let mut gamma_hat = None;
        let mut g_block = None;
        let mut gamma_clamped = false;
        let coefficient_raw;
        let gamma_used;
        if let Some(c) = opts.coefficient_override {
            coefficient_raw = c;
            gamma_used = opts.gamma_override;
        } else {
            let gamma = match opts.gamma_override {
                Some(v) => v,
                None => {
                    let est = self.estimate_gamma(weights)?;
                    gamma_hat = Some(est.gamma_hat);
                    g_block = Some(est.g);
                    let clamped = clamp_gamma(est.gamma_hat);
                    gamma_clamped = clamped != est.gamma_hat;
                    clamped
                }
            };
            gamma_used = Some(gamma);
            coefficient_raw = 2.0 - gamma - big_gamma;
        }
        let clamped = opts.coefficient_override.is_none() && coefficient_raw < 0.0;
        let coefficient = if clamped { 0.0 } else { coefficient_raw };

        let scale = coefficient * sigma.value * sigma.value / self.n as f64;
        let s = weights.prefix_sum_sq(sel.n_plus);
        let penalized: Vec<f64> = sel
            .tau_curve
            .iter()
            .zip(&s)
            .map(|(t, s)| if scale == 0.0 { *t } else { t + scale * s })
            .collect();
        let (idx, tau_star) = argmin_first(&penalized, TIE_TOLERANCE);

        sel.variant = Variant::Penalized;
        sel.m_plain = Some(sel.m);
        sel.m = idx + 1;
        sel.tau_star = tau_star;
        sel.penalized_curve = Some(penalized);
        sel.gamma_hat = gamma_hat;
        sel.gamma_used = gamma_used;
        sel.gamma_clamped = gamma_clamped;
        sel.g_block = g_block;
        sel.big_gamma = Some(big_gamma);
        sel.big_gamma_source = Some(big_gamma_source);
        sel.penalty_coefficient_raw = Some(coefficient_raw);
        sel.penalty_coefficient = Some(coefficient);
        sel.clamped = clamped;
        sel.sigma = Some(sigma);
        Ok(sel)
    }

    /// M⁽ᵖ⁾(n) = argmin Σ_{k=N+1}^{2N} |w(k) c(k,n)|^p over [1, Ent((N⁺)^{1/p})].
    pub fn select_adaptive_p(&self, weights: &WeightSequence, p: f64) -> Result<AdaptiveSelection> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::Domain(format!("modular exponent p must be finite and > 1, got {p}")));
        }
        let np = signal::n_plus(self.n, weights);
        let upto = integer_root(np, p);
        let curve = self.curve(Some(weights), upto, p)?;
        Ok(AdaptiveSelection::plain(self.n, upto, curve, p))
    }

    /// N₁(n) = argmin Σ_{k=N+1}^{2N} c²(k,n) over [1, N⁺]: the cutoff chosen
    /// for g, then reused for f.
    pub fn select_plug_in(&self, weights: &WeightSequence) -> Result<AdaptiveSelection> {
        let np = signal::n_plus(self.n, weights);
        let curve = self.curve(None, np, 2.0)?;
        Ok(AdaptiveSelection::plain(self.n, np, curve, 2.0))
    }

    pub fn report(&self, weights: &WeightSequence, selection: AdaptiveSelection) -> Result<EstimateReport> {
        weights.ensure_covers(selection.m)?;
        let coefficients = CoefficientVector::new(self.solution_coefficients(weights, selection.m))?;
        Ok(EstimateReport {
            truncation: selection.m,
            sigma_used: selection.sigma,
            coefficients,
            selection: Some(selection),
        })
    }
}

/// Largest m ≥ 1 with m^p ≤ x.
fn integer_root(x: usize, p: f64) -> usize {
    let xf = x as f64;
    let fits = |m: usize| (m as f64).powf(p) <= xf * (1.0 + 1e-12);
    let mut m = xf.powf(1.0 / p).floor().max(1.0) as usize;
    while fits(m + 1) {
        m += 1;
    }
    while m > 1 && !fits(m) {
        m -= 1;
    }
    m
}

/// G(n) = Ent(exp(√ln n)).
pub fn gamma_block(n: usize) -> usize {
    ((n as f64).ln().sqrt().exp()).floor() as usize
}

/// γ(n) as it enters the penalty: clamped into [0, 0.99], with non-finite
/// ratios mapped to 0.
pub fn clamp_gamma(raw: f64) -> f64 {
    if raw.is_finite() {
        raw.clamp(0.0, GAMMA_CLAMP_MAX)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaEstimate {
    pub gamma_hat: f64,
    #[serde(rename = "G")]
    pub g: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaOrigin {
    Known,
    Rss,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaUsed {
    pub value: f64,
    pub origin: SigmaOrigin,
}

impl SigmaUsed {
    pub fn known(value: f64) -> Result<Self> {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::config("sigma", format!("must be finite and >= 0, got {value}")));
        }
        Ok(SigmaUsed {
            value,
            origin: SigmaOrigin::Known,
        })
    }

    /// The RSS estimate with preliminary truncation `pre_n`, defaulting to
    /// Ent(n^{1/3}).
    pub fn estimated(obs: &ObservationSet, pre_n: Option<usize>) -> Result<Self> {
        let pre = pre_n.unwrap_or_else(|| simulate::default_pre_truncation(obs.n()));
        Ok(SigmaUsed {
            value: simulate::estimate_sigma(obs, pre)?,
            origin: SigmaOrigin::Rss,
        })
    }
}

/// Overrides for the penalized rule.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyOptions {
    /// Used verbatim in place of the γ(n) statistic (no clamping).
    pub gamma_override: Option<f64>,
    /// Used verbatim as (2 − γ − Γ) (no clamping).
    pub coefficient_override: Option<f64>,
    /// Γ; defaults to the kernel's analytic value.
    pub big_gamma: Option<f64>,
    /// Fall back to the empirical Γ diagnostic for kernels without an
    /// analytic value.
    pub accept_empirical_big_gamma: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Plain,
    Penalized,
}

/// A truncation choice with the curve that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveSelection {
    pub variant: Variant,
    pub n: usize,
    /// Upper end of the scanned range [1, N⁺].
    pub n_plus: usize,
    /// Block exponent p of the scanned statistic (2 for τ).
    pub exponent: f64,
    /// τ(N,n) for N = 1..=n_plus (index N − 1).
    pub tau_curve: Vec<f64>,
    /// τ₁(N,n), penalized variant only.
    pub penalized_curve: Option<Vec<f64>>,
    #[serde(rename = "M")]
    pub m: usize,
    /// The plain M(n) alongside a penalized selection.
    #[serde(rename = "M_plain")]
    pub m_plain: Option<usize>,
    /// Minimum of the variant's own curve.
    pub tau_star: f64,
    /// Raw γ(n) before clamping.
    pub gamma_hat: Option<f64>,
    pub gamma_used: Option<f64>,
    pub gamma_clamped: bool,
    #[serde(rename = "G")]
    pub g_block: Option<usize>,
    pub big_gamma: Option<f64>,
    pub big_gamma_source: Option<Provenance>,
    pub penalty_coefficient_raw: Option<f64>,
    pub penalty_coefficient: Option<f64>,
    /// Set when (2 − γ − Γ) was negative and replaced by 0.
    pub clamped: bool,
    pub sigma: Option<SigmaUsed>,
}

impl AdaptiveSelection {
    fn plain(n: usize, n_plus: usize, tau_curve: Vec<f64>, exponent: f64) -> Self {
        let (idx, tau_star) = argmin_first(&tau_curve, TIE_TOLERANCE);
        AdaptiveSelection {
            variant: Variant::Plain,
            n,
            n_plus,
            exponent,
            tau_curve,
            penalized_curve: None,
            m: idx + 1,
            m_plain: None,
            tau_star,
            gamma_hat: None,
            gamma_used: None,
            gamma_clamped: false,
            g_block: None,
            big_gamma: None,
            big_gamma_source: None,
            penalty_coefficient_raw: None,
            penalty_coefficient: None,
            clamped: false,
            sigma: None,
        }
    }

    /// The curve M was chosen from.
    pub fn own_curve(&self) -> &[f64] {
        self.penalized_curve.as_deref().unwrap_or(&self.tau_curve)
    }

    pub fn summary(&self) -> SelectionSummary {
        let (m, m1) = match self.variant {
            Variant::Plain => (self.m, None),
            Variant::Penalized => (self.m_plain.unwrap_or(self.m), Some(self.m)),
        };
        SelectionSummary {
            m,
            m1,
            gamma_hat: self.gamma_hat,
            g: self.g_block,
            penalty_coefficient: self.penalty_coefficient,
            clamped: self.clamped,
            n_plus: self.n_plus,
        }
    }

    /// Writes the "N,tau,tau1" table (tau1 empty for a plain selection).
    pub fn write_diagnostics_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| {
            writeln!(w, "N,tau,tau1")?;
            for (i, t) in self.tau_curve.iter().enumerate() {
                let t1 = self.penalized_curve.as_ref().map(|c| c[i]);
                writeln!(w, "{},{},{}", i + 1, fmt_f64(*t), fmt_opt(t1))?;
            }
            Ok(())
        })
    }

    pub fn write_summary_json(&self, path: &Path) -> Result<()> {
        write_json(path, &self.summary())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "M1")]
    pub m1: Option<usize>,
    pub gamma_hat: Option<f64>,
    #[serde(rename = "G")]
    pub g: Option<usize>,
    pub penalty_coefficient: Option<f64>,
    pub clamped: bool,
    #[serde(rename = "N_plus")]
    pub n_plus: usize,
}

/// A truncated series estimate of f.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub truncation: usize,
    /// c(k,n)·w(k) for k = 1..=truncation.
    pub coefficients: CoefficientVector,
    pub selection: Option<AdaptiveSelection>,
    pub sigma_used: Option<SigmaUsed>,
}

impl EstimateReport {
    pub fn evaluate(&self, t: f64) -> f64 {
        basis::synthesize(&self.coefficients, None, t).expect("no multipliers")
    }
}

/// f(N,n,t) = Σ_{k≤N} c(k,n) w(k) φ_k(t) with 1 ≤ N ≤ ⌊n/3⌋.
pub fn projection_estimate(obs: &ObservationSet, weights: &WeightSequence, big_n: usize) -> Result<EstimateReport> {
    let c = basis::empirical_coefficients_with(obs, big_n, CoefficientMethod::Fast)?;
    weights.ensure_covers(big_n)?;
    let coeffs: Vec<f64> = c.as_slice().iter().enumerate().map(|(i, v)| v * weights.w(i + 1)).collect();
    Ok(EstimateReport {
        truncation: big_n,
        coefficients: CoefficientVector::new(coeffs)?,
        selection: None,
        sigma_used: None,
    })
}

pub fn tau(obs: &ObservationSet, weights: &WeightSequence, big_n: usize) -> Result<f64> {
    EmpiricalSpectrum::new(obs).tau(weights, big_n)
}

pub fn select_adaptive(obs: &ObservationSet, weights: &WeightSequence) -> Result<AdaptiveSelection> {
    EmpiricalSpectrum::new(obs).select_adaptive(weights)
}

pub fn estimate_gamma(obs: &ObservationSet, weights: &WeightSequence) -> Result<GammaEstimate> {
    EmpiricalSpectrum::new(obs).estimate_gamma(weights)
}

pub fn select_penalized(
    obs: &ObservationSet,
    weights: &WeightSequence,
    sigma: SigmaUsed,
    opts: &PenaltyOptions,
) -> Result<AdaptiveSelection> {
    EmpiricalSpectrum::new(obs).select_penalized(weights, sigma, opts)
}

pub fn select_adaptive_p(obs: &ObservationSet, weights: &WeightSequence, p: f64) -> Result<AdaptiveSelection> {
    EmpiricalSpectrum::new(obs).select_adaptive_p(weights, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlugInComparison {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N1")]
    pub n1: usize,
    pub f_hat_risk: f64,
    pub f1_risk: f64,
}

/// Risks ‖f̂ − f‖² of the adaptive estimate and of the plug-in f̂₁ against a
/// known truth.
pub fn plug_in_comparison(
    obs: &ObservationSet,
    weights: &WeightSequence,
    truth: &SignalSpectrum,
) -> Result<PlugInComparison> {
    let spec = EmpiricalSpectrum::new(obs);
    let m = spec.select_adaptive(weights)?.m;
    let n1 = spec.select_plug_in(weights)?.m;
    Ok(PlugInComparison {
        m,
        n1,
        f_hat_risk: signal::l2_error(truth, weights, &spec.solution_coefficients(weights, m))?,
        f1_risk: signal::l2_error(truth, weights, &spec.solution_coefficients(weights, n1))?,
    })
}
