//! Sampling distribution of the γ(n) plug-in statistic.

use serde::{Deserialize, Serialize};

use super::config::Scenario;
use super::{clean_signals, stats, Check, Witnesses};
use crate::error::Result;
use crate::estimators::{clamp_gamma, gamma_block};
use crate::signal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub n: usize,
    #[serde(rename = "G")]
    pub g: usize,
    pub replications: usize,
    pub gamma_analytic: Option<f64>,
    pub median_raw: Option<f64>,
    pub q25_raw: Option<f64>,
    pub q75_raw: Option<f64>,
    pub mean_clamped: f64,
    /// Replications with a zero denominator or otherwise non-finite ratio.
    pub nonfinite: usize,
    pub abs_error_median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaReport {
    pub scenario: String,
    pub replications: usize,
    /// False when the signal has no analytic tail ratio.
    pub applicable: bool,
    pub rows: Vec<GammaRow>,
    pub witnesses: Witnesses,
    pub checks: Vec<Check>,
}

pub fn run_gamma_experiment(scn: &Scenario) -> Result<GammaReport> {
    let cfg = &scn.config;
    let analytic = signal::gamma_limit(&scn.signal, &scn.weights).analytic();
    let clean = clean_signals(scn)?;
    let mut rows = Vec::new();
    for (idx, &n) in cfg.n_grid.iter().enumerate() {
        let raw: Vec<f64> =
            scn.map_replications(&clean[idx], |rep| Ok(rep.spectrum.estimate_gamma(&scn.weights)?.gamma_hat))?;
        let clamped: Vec<f64> = raw.iter().map(|g| clamp_gamma(*g)).collect();
        let median_raw = stats::median(&raw);
        rows.push(GammaRow {
            n,
            g: gamma_block(n),
            replications: raw.len(),
            gamma_analytic: analytic,
            median_raw,
            q25_raw: stats::quantile(&raw, 0.25),
            q75_raw: stats::quantile(&raw, 0.75),
            mean_clamped: stats::mean(&clamped),
            nonfinite: raw.iter().filter(|g| !g.is_finite()).count(),
            abs_error_median: analytic.zip(median_raw).map(|(a, m)| (m - a).abs()),
        });
    }
    let checks = match rows.last() {
        Some(last) => vec![match last.abs_error_median {
            Some(e) => Check::new(
                "gamma_median",
                Some(e <= 0.15),
                format!(
                    "median gamma(n) {:.4} against {:.4} at n={}",
                    last.median_raw.unwrap_or(f64::NAN),
                    last.gamma_analytic.unwrap_or(f64::NAN),
                    last.n
                ),
            ),
            None => Check::new("gamma_median", None, "not applicable: no analytic tail ratio or no finite ratios"),
        }],
        None => Vec::new(),
    };
    Ok(GammaReport {
        scenario: cfg.scenario.clone(),
        replications: cfg.replications,
        applicable: analytic.is_some(),
        rows,
        witnesses: scn.witnesses(),
        checks,
    })
}
