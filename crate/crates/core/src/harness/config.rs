//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::PenaltyOptions;
use crate::inference::EnergyTruncation;
use crate::signal::{self, SignalSpec, SignalSpectrum};
use crate::simulate::NoiseModel;
use crate::spectrum::{KernelSpec, WeightSequence};

/// Where the noise scale used by the estimators comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaSource {
    /// The simulation σ.
    #[default]
    Known,
    /// The residual estimate from each replication.
    Estimate,
}

/// An estimator run inside the risk experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantSpec {
    /// Projection estimate at the oracle cutoff N₀.
    ProjectionFixed,
    Adaptive,
    Penalized,
    PlugIn,
    /// Modular-space rule with exponent p.
    AdaptiveP(f64),
}

impl VariantSpec {
    pub fn label(&self) -> String {
        match self {
            VariantSpec::ProjectionFixed => "projection_fixed".into(),
            VariantSpec::Adaptive => "adaptive".into(),
            VariantSpec::Penalized => "penalized".into(),
            VariantSpec::PlugIn => "plug_in".into(),
            VariantSpec::AdaptiveP(p) => format!("adaptive_p{p}"),
        }
    }
}

/// Confidence-region constructions evaluated by the coverage experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiKind {
    /// τ₁* ± z·σ·√(2M₁/n).
    FunctionL2,
    /// τ₁* ± z·σ²·√(2M₁/n).
    FunctionL2SigmaSq,
    /// [0, 1.05·τ*/(1 − γ₊)²].
    FunctionL2Rough,
    /// Tail-bound interval.
    FunctionL2Tail,
    Energy,
    EnergyFisher,
}

impl CiKind {
    pub const ALL: [CiKind; 6] = [
        CiKind::FunctionL2,
        CiKind::FunctionL2SigmaSq,
        CiKind::FunctionL2Rough,
        CiKind::FunctionL2Tail,
        CiKind::Energy,
        CiKind::EnergyFisher,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            CiKind::FunctionL2 => "function_l2",
            CiKind::FunctionL2SigmaSq => "function_l2_sigma_sq",
            CiKind::FunctionL2Rough => "function_l2_rough",
            CiKind::FunctionL2Tail => "function_l2_tail",
            CiKind::Energy => "energy",
            CiKind::EnergyFisher => "energy_fisher",
        }
    }
}

fn default_variants() -> Vec<VariantSpec> {
    vec![VariantSpec::Adaptive, VariantSpec::Penalized]
}

fn default_levels() -> Vec<f64> {
    vec![0.95]
}

fn default_rate_band() -> [f64; 2] {
    [-0.65, -0.35]
}

/// A Monte Carlo scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub kernel: KernelSpec,
    pub signal: SignalSpec,
    #[serde(default)]
    pub noise: NoiseModel,
    /// Noise scale of the simulation.
    pub sigma: f64,
    #[serde(default)]
    pub sigma_source: SigmaSource,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_variants")]
    pub variants: Vec<VariantSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<PathBuf>,
    #[serde(default)]
    pub penalty: PenaltyOptions,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    /// Defaults to every construction applicable to the scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_kinds: Option<Vec<CiKind>>,
    #[serde(default)]
    pub energy_truncation: EnergyTruncation,
    #[serde(default = "default_rate_band")]
    pub rate_band: [f64; 2],
    /// Preliminary truncation of the residual σ estimate; defaults to Ent(n^{1/3}).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre_n: Option<usize>,
}

/// A validated configuration with its model objects.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ExperimentConfig,
    pub weights: WeightSequence,
    pub signal: SignalSpectrum,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn resolve(&self) -> Result<Scenario> {
        if self.replications == 0 {
            return Err(Error::config("replications", "must be >= 1"));
        }
        if self.n_grid.is_empty() {
            return Err(Error::config("n_grid", "must list at least one sample size"));
        }
        if let Some(n) = self.n_grid.iter().find(|n| **n < 16 || **n % 4 != 0) {
            return Err(Error::config("n_grid", format!("entries must be >= 16 and multiples of 4, got {n}")));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("sigma", format!("must be finite and >= 0, got {}", self.sigma)));
        }
        if let Some(l) = self.levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return Err(Error::config("levels", format!("entries must lie in (0, 1), got {l}")));
        }
        if self.rate_band[0] >= self.rate_band[1] {
            return Err(Error::config("rate_band", "lower end must be below the upper end"));
        }
        for v in &self.variants {
            if let VariantSpec::AdaptiveP(p) = v {
                if !(*p > 1.0 && p.is_finite()) {
                    return Err(Error::config("variants.adaptive_p", format!("exponent must be > 1, got {p}")));
                }
            }
        }
        if self.pre_n == Some(0) {
            return Err(Error::config("pre_n", "must be >= 1"));
        }
        self.noise.validate()?;
        let weights = WeightSequence::new(self.kernel.clone())?;
        let signal = SignalSpectrum::new(self.signal.clone())?;
        signal::validate_adaptive(&signal, &weights)?;
        Ok(Scenario {
            config: self.clone(),
            weights,
            signal,
        })
    }
}

impl Scenario {
    /// Rate fits need a power-law signal.
    pub fn validate_rate(&self) -> Result<()> {
        match self.signal.delta() {
            Some(_) => Ok(()),
            None => Err(Error::config("signal", "rate scenarios need a power-law signal")),
        }
    }

    /// Warning text when Δ > 2θ + 1 fails; the rate formula is then at or
    /// beyond its stated range.
    pub fn rate_condition_warning(&self) -> Option<String> {
        let delta = self.signal.delta()?;
        let bound = 2.0 * self.weights.theta() + 1.0;
        (delta <= bound).then(|| format!("delta = {delta} does not exceed 2 theta + 1 = {bound}; the rate formula is at its boundary"))
    }

    /// −(2Δ − 2θ − 1)/(2Δ) for power-law signals.
    pub fn theoretical_slope(&self) -> Option<f64> {
        let delta = self.signal.delta()?;
        Some(-(2.0 * delta - 2.0 * self.weights.theta() - 1.0) / (2.0 * delta))
    }

    pub fn ci_kinds(&self) -> Vec<CiKind> {
        self.config.ci_kinds.clone().unwrap_or_else(|| CiKind::ALL.to_vec())
    }
}
