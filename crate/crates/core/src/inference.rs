//! Energy estimation with the anti-penalty correction and the confidence
//! regions for ‖f̃ − f‖² and for the energy H(f) = Σ c²(k)w²(k).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{AdaptiveSelection, EmpiricalSpectrum, Variant};
use crate::simulate::{NoiseModel, ObservationSet};
use crate::special::two_sided_z;
use crate::spectrum::WeightSequence;

/// Which cutoff enters the energy estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyTruncation {
    /// M(n).
    #[default]
    Plain,
    /// M₁(n); needs a penalized selection.
    Penalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    /// Σ_{k≤M} c²(k,n)w²(k) − σ²S(M)/n; may be negative.
    pub h_hat: f64,
    #[serde(rename = "M_used")]
    pub m_used: usize,
    pub anti_penalty: f64,
    pub sigma_used: f64,
    /// Σ_{k≤M} c²(k,n)w⁴(k) − σ²Σ_{k≤M}w⁴(k)/n; may be negative.
    pub b_norm_sq_hat: f64,
    pub n: usize,
}

/// Energy estimate at a given cutoff.
pub fn energy_at(spec: &EmpiricalSpectrum, weights: &WeightSequence, m: usize, sigma: f64) -> Result<EnergyEstimate> {
    if m == 0 || m > spec.cap() {
        return Err(Error::Range {
            what: "energy truncation M",
            value: m,
            bound: spec.cap(),
        });
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("noise scale must be finite and >= 0, got {sigma}")));
    }
    weights.ensure_covers(m)?;
    let n = spec.n() as f64;
    let mut plug = 0.0;
    let mut plug_b = 0.0;
    for k in 1..=m {
        let w2 = weights.w(k).powi(2);
        let c2 = spec.c(k).powi(2);
        plug += c2 * w2;
        plug_b += c2 * w2 * w2;
    }
    let var = sigma * sigma / n;
    let anti_penalty = var * weights.sum_sq(m);
    Ok(EnergyEstimate {
        h_hat: plug - anti_penalty,
        m_used: m,
        anti_penalty,
        sigma_used: sigma,
        b_norm_sq_hat: plug_b - var * weights.sum_fourth(m),
        n: spec.n(),
    })
}

/// H(n,f) with M taken from `selection` as chosen by `which`.
pub fn energy_estimate(
    obs: &ObservationSet,
    weights: &WeightSequence,
    selection: &AdaptiveSelection,
    which: EnergyTruncation,
    sigma: f64,
) -> Result<EnergyEstimate> {
    let m = energy_cutoff(selection, which)?;
    energy_at(&EmpiricalSpectrum::new(obs), weights, m, sigma)
}

pub fn energy_cutoff(selection: &AdaptiveSelection, which: EnergyTruncation) -> Result<usize> {
    match (which, selection.variant) {
        (EnergyTruncation::Plain, Variant::Plain) => Ok(selection.m),
        (EnergyTruncation::Plain, Variant::Penalized) => Ok(selection.m_plain.unwrap_or(selection.m)),
        (EnergyTruncation::Penalized, Variant::Penalized) => Ok(selection.m),
        (EnergyTruncation::Penalized, Variant::Plain) => Err(Error::Domain(
            "energy truncation M1 requires a penalized selection".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    FunctionL2,
    Energy,
    EnergyFisher,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum PivotLaw {
    AsymptoticGaussian,
    TailBound {
        q: f64,
        #[serde(rename = "Q")]
        big_q: f64,
        r: f64,
    },
}

/// Normalization of the pivot in the function-space interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotScale {
    /// Half-width z·σ·√(2M₁/n).
    #[default]
    Sigma,
    /// Half-width z·σ²·√(2M₁/n).
    SigmaSquared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRegion {
    pub kind: RegionKind,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    pub pivot_law: PivotLaw,
    pub diagnostics: BTreeMap<String, f64>,
}

impl ConfidenceRegion {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("confidence level must lie in (0, 1), got {level}")))
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("noise scale must be finite and >= 0, got {sigma}")))
    }
}

fn require_penalized(selection: &AdaptiveSelection) -> Result<()> {
    if selection.variant == Variant::Penalized {
        Ok(())
    } else {
        Err(Error::Domain(
            "the function-space interval needs the penalized selection (M1 and tau1*)".into(),
        ))
    }
}

fn diag(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
    entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// τ₁* ± z·s·√(2M₁/n) for ‖f̃ − f‖², with s = σ or σ² per `scale`; the
/// lower end is clamped at 0.
pub fn function_ci(selection: &AdaptiveSelection, sigma: f64, level: f64, scale: PivotScale) -> Result<ConfidenceRegion> {
    require_penalized(selection)?;
    check_level(level)?;
    check_sigma(sigma)?;
    let z = two_sided_z(level);
    let root = (2.0 * selection.m as f64 / selection.n as f64).sqrt();
    let hw_sigma = z * sigma * root;
    let hw_sigma_sq = z * sigma * sigma * root;
    let hw = match scale {
        PivotScale::Sigma => hw_sigma,
        PivotScale::SigmaSquared => hw_sigma_sq,
    };
    let centre = selection.tau_star;
    Ok(ConfidenceRegion {
        kind: RegionKind::FunctionL2,
        level,
        lower: (centre - hw).max(0.0),
        upper: centre + hw,
        pivot_law: PivotLaw::AsymptoticGaussian,
        diagnostics: diag(&[
            ("tau_star", centre),
            ("M1", selection.m as f64),
            ("z", z),
            ("xi_scale", sigma * root),
            ("half_width_sigma", hw_sigma),
            ("half_width_sigma_sq", hw_sigma_sq),
        ]),
    })
}

/// One-sided region [0, 1.05·τ*/(1 − γ₊)²] for ‖f̂ − f‖². Valid with
/// probability tending to one; needs the tail ratio γ₊ ∈ (0, 1).
pub fn function_ci_rough(selection: &AdaptiveSelection, gamma_plus: f64) -> Result<ConfidenceRegion> {
    if !(gamma_plus > 0.0 && gamma_plus < 1.0) {
        return Err(Error::Domain(format!("gamma_plus must lie in (0, 1), got {gamma_plus}")));
    }
    let m = selection.m_plain.unwrap_or(selection.m);
    let tau_star = selection.tau_curve[m - 1];
    let factor = 1.05 / (1.0 - gamma_plus).powi(2);
    Ok(ConfidenceRegion {
        kind: RegionKind::FunctionL2,
        level: 0.95,
        lower: 0.0,
        upper: factor * tau_star,
        pivot_law: PivotLaw::AsymptoticGaussian,
        diagnostics: diag(&[("tau_star", tau_star), ("M", m as f64), ("gamma_plus", gamma_plus), ("factor", factor)]),
    })
}

/// Non-asymptotic interval from the tail bound P(ξ > Qu) ≤ exp(−u^r/2),
/// r = min(q/2, 2): τ₁* ± σ√(2M₁/n)·Q·(2 ln(2/(1 − level)))^{1/r}.
pub fn function_ci_tail(
    selection: &AdaptiveSelection,
    sigma: f64,
    noise: &NoiseModel,
    level: f64,
) -> Result<ConfidenceRegion> {
    check_level(level)?;
    check_sigma(sigma)?;
    let (q, big_q) = noise.tail_params().ok_or_else(|| {
        Error::Domain(format!(
            "noise family {} declares no exponential tail parameters (q, Q)",
            noise.family_name()
        ))
    })?;
    let r = tail_exponent(q);
    let u = (2.0 * (2.0 / (1.0 - level)).ln()).powf(1.0 / r);
    let scale = sigma * (2.0 * selection.m as f64 / selection.n as f64).sqrt();
    let hw = scale * big_q * u;
    let centre = selection.tau_star;
    Ok(ConfidenceRegion {
        kind: RegionKind::FunctionL2,
        level,
        lower: (centre - hw).max(0.0),
        upper: centre + hw,
        pivot_law: PivotLaw::TailBound { q, big_q, r },
        diagnostics: diag(&[("tau_star", centre), ("M1", selection.m as f64), ("u", u), ("xi_scale", scale)]),
    })
}

/// r(q) = min(q/2, 2).
pub fn tail_exponent(q: f64) -> f64 {
    (q / 2.0).min(2.0)
}

/// Ĥ ± z·2σ√B̂/√n, with B̂ clamped at 0.
pub fn energy_ci(est: &EnergyEstimate, sigma: f64, n: usize, level: f64) -> Result<ConfidenceRegion> {
    check_level(level)?;
    check_sigma(sigma)?;
    let z = two_sided_z(level);
    let b = est.b_norm_sq_hat.max(0.0);
    let hw = z * 2.0 * sigma * b.sqrt() / (n as f64).sqrt();
    Ok(ConfidenceRegion {
        kind: RegionKind::Energy,
        level,
        lower: est.h_hat - hw,
        upper: est.h_hat + hw,
        pivot_law: PivotLaw::AsymptoticGaussian,
        diagnostics: diag(&[("H_hat", est.h_hat), ("B_norm_sq_hat", est.b_norm_sq_hat), ("z", z), ("M", est.m_used as f64)]),
    })
}

/// [(√Ĥ − zσ/√n)₊², (√Ĥ + zσ/√n)²] from the square-root transform; identity
/// kernel only.
pub fn energy_ci_fisher(
    est: &EnergyEstimate,
    weights: &WeightSequence,
    sigma: f64,
    n: usize,
    level: f64,
) -> Result<ConfidenceRegion> {
    check_level(level)?;
    check_sigma(sigma)?;
    if !weights.is_identity() {
        return Err(Error::Domain(
            "the square-root energy interval applies only to the identity kernel w(k) = 1".into(),
        ));
    }
    if est.h_hat <= 0.0 {
        return Err(Error::Precondition(format!(
            "energy estimate {} is not positive; a larger n is needed for the square-root interval",
            est.h_hat
        )));
    }
    let z = two_sided_z(level);
    let root = est.h_hat.sqrt();
    let d = z * sigma / (n as f64).sqrt();
    Ok(ConfidenceRegion {
        kind: RegionKind::EnergyFisher,
        level,
        lower: (root - d).max(0.0).powi(2),
        upper: (root + d).powi(2),
        pivot_law: PivotLaw::AsymptoticGaussian,
        diagnostics: diag(&[("H_hat", est.h_hat), ("z", z), ("M", est.m_used as f64)]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::UniformGrid;
    use crate::estimators::{select_adaptive, select_penalized, PenaltyOptions, SigmaUsed};
    use crate::signal::{self, SignPattern, SignalSpectrum};
    use crate::simulate::{forward, observe};
    use approx::assert_abs_diff_eq;

    fn est(h: f64, b: f64) -> EnergyEstimate {
        EnergyEstimate {
            h_hat: h,
            m_used: 10,
            anti_penalty: 0.0,
            sigma_used: 0.5,
            b_norm_sq_hat: b,
            n: 4096,
        }
    }

    fn penalized(n: usize, sigma: f64, seed: u64) -> AdaptiveSelection {
        let w = WeightSequence::power_law(1.0, 1.0).unwrap();
        let sig = SignalSpectrum::power_law(3.0, 1.0, SignPattern::Alternating).unwrap();
        let g = forward(&sig, UniformGrid::new(n).unwrap()).unwrap();
        let obs = observe(&g, sigma, &NoiseModel::Gaussian, seed).unwrap();
        select_penalized(&obs, &w, SigmaUsed::known(sigma).unwrap(), &PenaltyOptions::default()).unwrap()
    }

    #[test]
    fn energy_of_single_basis_function() {
        let g = forward(&SignalSpectrum::trig_poly(vec![0.0, 1.0]).unwrap(), UniformGrid::new(64).unwrap()).unwrap();
        let obs = ObservationSet::from_values(g).unwrap();
        let id = WeightSequence::identity();
        let sel = select_adaptive(&obs, &id).unwrap();
        let e = energy_estimate(&obs, &id, &sel, EnergyTruncation::Plain, 0.0).unwrap();
        assert_eq!(e.m_used, 2);
        assert_abs_diff_eq!(e.h_hat, 1.0, epsilon = 1e-14);
        assert!(energy_estimate(&obs, &id, &sel, EnergyTruncation::Penalized, 0.0).is_err());
    }

    #[test]
    fn energy_exact_for_trig_poly() {
        let vals = vec![0.5, -1.0, 0.25, 2.0, 0.0, 0.75];
        let sig = SignalSpectrum::trig_poly(vals).unwrap();
        let w = WeightSequence::power_law(1.0, 2.0).unwrap();
        let obs = ObservationSet::from_values(forward(&sig, UniformGrid::new(128).unwrap()).unwrap()).unwrap();
        let e = energy_at(&EmpiricalSpectrum::new(&obs), &w, 20, 0.0).unwrap();
        assert_abs_diff_eq!(e.h_hat, signal::energy(&sig, &w).unwrap(), epsilon = 1e-12);
        assert_abs_diff_eq!(e.b_norm_sq_hat, signal::b_norm_sq(&sig, &w).unwrap(), epsilon = 1e-11);
    }

    #[test]
    fn anti_penalty_formula() {
        let obs = observe(&vec![0.0; 256], 0.5, &NoiseModel::Gaussian, 1).unwrap();
        let w = WeightSequence::power_law(1.0, 1.0).unwrap();
        let spec = EmpiricalSpectrum::new(&obs);
        let e = energy_at(&spec, &w, 10, 0.5).unwrap();
        assert_abs_diff_eq!(e.anti_penalty, 0.25 * w.sum_sq(10) / 256.0, epsilon = 1e-15);
        let plug: f64 = (1..=10).map(|k| (spec.c(k) * w.w(k)).powi(2)).sum();
        assert_abs_diff_eq!(e.h_hat, plug - e.anti_penalty, epsilon = 1e-15);
    }

    #[test]
    fn energy_ci_half_width_example() {
        let ci = energy_ci(&est(1.0, 2.0), 0.5, 4096, 0.95).unwrap();
        assert_abs_diff_eq!(ci.half_width(), 1.959963984540054 * 2.0 * 0.5 * 2f64.sqrt() / 64.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ci.half_width(), 0.04331, epsilon = 1e-5);
        let point = energy_ci(&est(0.7, 0.0), 0.0, 4096, 0.95).unwrap();
        assert_eq!((point.lower, point.upper), (0.7, 0.7));
        let neg_b = energy_ci(&est(0.7, -1.0), 0.5, 4096, 0.95).unwrap();
        assert_eq!(neg_b.lower, neg_b.upper);
    }

    #[test]
    fn fisher_interval_example() {
        let id = WeightSequence::identity();
        let ci = energy_ci_fisher(&est(1.0, 1.0), &id, 0.5, 400, 0.95).unwrap();
        let d: f64 = 1.959963984540054 * 0.025;
        assert_abs_diff_eq!(ci.lower, (1.0 - d).powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(ci.upper, (1.0 + d).powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(ci.lower, 0.904402, epsilon = 1e-6);
        assert_abs_diff_eq!(ci.upper, 1.100399, epsilon = 1e-6);
        let point = energy_ci_fisher(&est(1.0, 1.0), &id, 0.0, 400, 0.95).unwrap();
        assert_eq!((point.lower, point.upper), (1.0, 1.0));
        let w = WeightSequence::power_law(1.0, 1.0).unwrap();
        assert!(matches!(energy_ci_fisher(&est(1.0, 1.0), &w, 0.5, 400, 0.95), Err(Error::Domain(_))));
        assert!(matches!(energy_ci_fisher(&est(-0.1, 1.0), &id, 0.5, 400, 0.95), Err(Error::Precondition(_))));
    }

    #[test]
    fn fisher_agrees_with_plain_to_first_order() {
        let id = WeightSequence::identity();
        for h in [0.9, 1.0, 1.1] {
            let e = est(h, h);
            let a = energy_ci(&e, 0.5, 16384, 0.95).unwrap().half_width();
            let b = energy_ci_fisher(&e, &id, 0.5, 16384, 0.95).unwrap().half_width();
            let ratio = b / a;
            assert!(ratio > 0.8 && ratio < 1.25, "{ratio}");
        }
    }

    #[test]
    fn rough_bound_example() {
        let mut sel = penalized(4096, 0.5, 1);
        sel.m_plain = None;
        sel.variant = Variant::Plain;
        sel.tau_curve[sel.m - 1] = 0.08;
        let ci = function_ci_rough(&sel, 0.125).unwrap();
        assert_abs_diff_eq!(ci.upper, 1.05 * 0.08 / 0.765625, epsilon = 1e-15);
        assert_abs_diff_eq!(ci.upper, 0.10971, epsilon = 1e-5);
        assert_eq!(ci.lower, 0.0);
        sel.tau_curve[sel.m - 1] = 0.0;
        let zero = function_ci_rough(&sel, 0.125).unwrap();
        assert_eq!((zero.lower, zero.upper), (0.0, 0.0));
        assert!(function_ci_rough(&sel, 1.0).is_err());
        assert!(function_ci_rough(&sel, 0.0).is_err());
    }

    #[test]
    fn function_ci_contract() {
        let sel = penalized(4096, 0.5, 2);
        let ci = function_ci(&sel, 0.5, 0.95, PivotScale::Sigma).unwrap();
        let hw = 1.959963984540054 * 0.5 * (2.0 * sel.m as f64 / 4096.0).sqrt();
        assert_abs_diff_eq!(ci.upper - sel.tau_star, hw, epsilon = 1e-14);
        assert!(ci.lower >= 0.0);
        let sq = function_ci(&sel, 0.5, 0.95, PivotScale::SigmaSquared).unwrap();
        assert_abs_diff_eq!(sq.upper - sel.tau_star, 0.5 * hw, epsilon = 1e-14);
        let wider = function_ci(&sel, 0.5, 0.99, PivotScale::Sigma).unwrap();
        assert!(wider.upper > ci.upper);
        let point = function_ci(&penalized(4096, 0.0, 2), 0.0, 0.95, PivotScale::Sigma).unwrap();
        assert_eq!(point.lower, point.upper);
        let mut plain = sel.clone();
        plain.variant = Variant::Plain;
        assert!(function_ci(&plain, 0.5, 0.95, PivotScale::Sigma).is_err());
        assert!(function_ci(&sel, 0.5, 1.0, PivotScale::Sigma).is_err());
    }

    #[test]
    fn tail_interval() {
        assert_eq!(tail_exponent(4.0), 2.0);
        assert_eq!(tail_exponent(1.0), 0.5);
        assert_eq!(tail_exponent(10.0), 2.0);
        let sel = penalized(4096, 0.5, 3);
        let gauss = function_ci_tail(&sel, 0.5, &NoiseModel::Gaussian, 0.95).unwrap();
        let asym = function_ci(&sel, 0.5, 0.95, PivotScale::Sigma).unwrap();
        assert!(gauss.upper > asym.upper);
        match gauss.pivot_law {
            PivotLaw::TailBound { r, .. } => assert_eq!(r, 1.0),
            _ => panic!(),
        }
        assert!(function_ci_tail(&sel, 0.5, &NoiseModel::StudentT { df: 6.0 }, 0.95).is_err());
    }

    #[test]
    fn region_serialization() {
        let ci = energy_ci(&est(1.0, 2.0), 0.5, 4096, 0.95).unwrap();
        let v: serde_json::Value = serde_json::to_value(&ci).unwrap();
        for key in ["kind", "level", "lower", "upper", "pivot_law", "diagnostics"] {
            assert!(v.get(key).is_some());
        }
        assert_eq!(v["kind"], "energy");
    }
}
