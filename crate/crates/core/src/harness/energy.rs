//! Sampling behaviour of the energy estimate: n·MSE against 4σ²‖f‖²_B and
//! normality of the standardized and square-root statistics.

use serde::{Deserialize, Serialize};

use super::config::Scenario;
use super::{clean_signals, stats, Check, Witnesses};
use crate::error::Result;
use crate::inference::{self, EnergyTruncation};
use crate::signal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub n: usize,
    pub replications: usize,
    #[serde(rename = "mean_M")]
    pub mean_m: f64,
    pub h_true: f64,
    pub mean_h_hat: f64,
    pub n_mse: f64,
    pub n_mse_se: f64,
    /// 4σ²‖f‖²_B.
    pub target: f64,
    pub ratio: Option<f64>,
    /// Mean and variance of √n(Ĥ − H)/(2σ‖f‖_B).
    pub z_mean: Option<f64>,
    pub z_var: Option<f64>,
    /// Mean and variance of √n(√Ĥ − √H)/σ over replications with Ĥ > 0
    /// (identity kernel only).
    pub fisher_mean: Option<f64>,
    pub fisher_var: Option<f64>,
    pub fisher_nonpositive: Option<usize>,
    /// S₂(N₀)/n.
    pub s2_witness: f64,
    /// ρ(N₀)/√n.
    pub rho_witness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub scenario: String,
    pub replications: usize,
    pub rows: Vec<EnergyRow>,
    pub witnesses: Witnesses,
    pub checks: Vec<Check>,
}

struct RepEnergy {
    h_hat: f64,
    m: usize,
}

pub fn run_energy_experiment(scn: &Scenario) -> Result<EnergyReport> {
    let cfg = &scn.config;
    let w = &scn.weights;
    let h_true = signal::energy(&scn.signal, w)?;
    let b_true = signal::b_norm_sq(&scn.signal, w)?;
    let target = 4.0 * cfg.sigma * cfg.sigma * b_true;
    let clean = clean_signals(scn)?;
    let mut rows = Vec::new();
    for (idx, &n) in cfg.n_grid.iter().enumerate() {
        let reps: Vec<RepEnergy> = scn.map_replications(&clean[idx], |rep| {
            let m = match cfg.energy_truncation {
                EnergyTruncation::Plain => rep.spectrum.select_adaptive(w)?.m,
                EnergyTruncation::Penalized => rep.spectrum.select_penalized(w, rep.sigma, &cfg.penalty)?.m,
            };
            let est = inference::energy_at(&rep.spectrum, w, m, rep.sigma.value)?;
            Ok(RepEnergy { h_hat: est.h_hat, m })
        })?;
        let nf = n as f64;
        let sq: Vec<f64> = reps.iter().map(|r| nf * (r.h_hat - h_true).powi(2)).collect();
        let n_mse = stats::mean(&sq);
        let (z_mean, z_var) = if target > 0.0 {
            let z: Vec<f64> = reps.iter().map(|r| nf.sqrt() * (r.h_hat - h_true) / target.sqrt()).collect();
            (Some(stats::mean(&z)), Some(stats::variance(&z)))
        } else {
            (None, None)
        };
        let (fisher_mean, fisher_var, fisher_nonpositive) = if w.is_identity() && cfg.sigma > 0.0 {
            let f: Vec<f64> = reps
                .iter()
                .filter(|r| r.h_hat > 0.0)
                .map(|r| nf.sqrt() * (r.h_hat.sqrt() - h_true.sqrt()) / cfg.sigma)
                .collect();
            (Some(stats::mean(&f)), Some(stats::variance(&f)), Some(reps.len() - f.len()))
        } else {
            (None, None, None)
        };
        let n0 = signal::oracle_risk(&scn.signal, w, n, cfg.sigma)?.n0;
        rows.push(EnergyRow {
            n,
            replications: reps.len(),
            mean_m: stats::mean(&reps.iter().map(|r| r.m as f64).collect::<Vec<_>>()),
            h_true,
            mean_h_hat: stats::mean(&reps.iter().map(|r| r.h_hat).collect::<Vec<_>>()),
            n_mse,
            n_mse_se: stats::std_err(&sq),
            target,
            ratio: (target > 0.0).then(|| n_mse / target),
            z_mean,
            z_var,
            fisher_mean,
            fisher_var,
            fisher_nonpositive,
            s2_witness: w.block_sum_fourth(n0) / nf,
            rho_witness: signal::rho(&scn.signal, w, n0)? / nf.sqrt(),
        });
    }
    let mut checks = Vec::new();
    if let Some(last) = rows.last() {
        checks.push(match last.ratio {
            Some(r) => Check::new(
                "energy_variance",
                Some((r - 1.0).abs() <= 0.25),
                format!("n*MSE / (4 sigma^2 |f|_B^2) = {r:.4} at n={}", last.n),
            ),
            None => Check::new("energy_variance", None, "skipped: no noise"),
        });
        checks.push(match (last.fisher_mean, last.fisher_var) {
            (Some(m), Some(v)) => Check::new(
                "fisher_normality",
                Some(m.abs() < 0.1 && (v - 1.0).abs() < 0.15),
                format!("square-root statistic mean {m:.4}, variance {v:.4} at n={}", last.n),
            ),
            _ => Check::new("fisher_normality", None, "skipped: identity kernel with noise only"),
        });
    }
    Ok(EnergyReport {
        scenario: cfg.scenario.clone(),
        replications: cfg.replications,
        rows,
        witnesses: scn.witnesses(),
        checks,
    })
}
