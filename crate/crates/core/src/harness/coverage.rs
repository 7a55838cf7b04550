//! Empirical coverage of the confidence regions against the exact truth.

use serde::{Deserialize, Serialize};

use super::config::{CiKind, Scenario};
use super::{clean_signals, stats, Check, Witnesses};
use crate::error::Result;
use crate::inference::{self, ConfidenceRegion, PivotScale};
use crate::signal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub n: usize,
    pub kind: String,
    pub level: f64,
    pub coverage: f64,
    pub se: f64,
    pub replications: usize,
    pub mean_lower: f64,
    pub mean_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub scenario: String,
    pub replications: usize,
    pub rows: Vec<CoverageRow>,
    /// Constructions left out, with the reason.
    pub skipped: Vec<(String, String)>,
    pub witnesses: Witnesses,
    pub checks: Vec<Check>,
}

impl CoverageReport {
    pub fn row(&self, n: usize, kind: CiKind, level: f64) -> Option<&CoverageRow> {
        self.rows.iter().find(|r| r.n == n && r.kind == kind.label() && r.level == level)
    }
}

/// (kind, level) pairs evaluated, plus the reasons for any omissions.
type Plan = (Vec<(CiKind, f64)>, Vec<(String, String)>);

fn plan(scn: &Scenario) -> Plan {
    let cfg = &scn.config;
    let mut cells = Vec::new();
    let mut skipped = Vec::new();
    let gamma_plus = signal::gamma_limit(&scn.signal, &scn.weights).analytic();
    for kind in scn.ci_kinds() {
        let reason = match kind {
            CiKind::FunctionL2Rough if gamma_plus.is_none() => Some("needs an analytic tail ratio gamma_plus"),
            CiKind::FunctionL2Tail if cfg.noise.tail_params().is_none() => Some("noise family declares no (q, Q)"),
            CiKind::EnergyFisher if !scn.weights.is_identity() => Some("identity kernel only"),
            _ => None,
        };
        if let Some(r) = reason {
            skipped.push((kind.label().to_string(), r.to_string()));
            continue;
        }
        if kind == CiKind::FunctionL2Rough {
            cells.push((kind, 0.95));
        } else {
            cells.extend(cfg.levels.iter().map(|l| (kind, *l)));
        }
    }
    (cells, skipped)
}

pub fn run_coverage_experiment(scn: &Scenario) -> Result<CoverageReport> {
    let cfg = &scn.config;
    let w = &scn.weights;
    let h_true = signal::energy(&scn.signal, w)?;
    let gamma_plus = signal::gamma_limit(&scn.signal, w).analytic();
    let (cells, skipped) = plan(scn);
    let needs_penalized = cells
        .iter()
        .any(|(k, _)| matches!(k, CiKind::FunctionL2 | CiKind::FunctionL2SigmaSq | CiKind::FunctionL2Tail));
    let clean = clean_signals(scn)?;
    let mut rows = Vec::new();
    for (idx, &n) in cfg.n_grid.iter().enumerate() {
        // per replication: (covered, lower, upper) for each cell
        let reps: Vec<Vec<(bool, f64, f64)>> = scn.map_replications(&clean[idx], |rep| {
            let spec = &rep.spectrum;
            let sigma = rep.sigma.value;
            let plain = spec.select_adaptive(w)?;
            let risk_plain = signal::l2_error(&scn.signal, w, &spec.solution_coefficients(w, plain.m))?;
            let penalized = if needs_penalized {
                let sel = spec.select_penalized(w, rep.sigma, &cfg.penalty)?;
                let risk = signal::l2_error(&scn.signal, w, &spec.solution_coefficients(w, sel.m))?;
                Some((sel, risk))
            } else {
                None
            };
            let m_energy = inference::energy_cutoff(penalized.as_ref().map_or(&plain, |p| &p.0), cfg.energy_truncation)?;
            let energy = inference::energy_at(spec, w, m_energy, sigma)?;
            cells
                .iter()
                .map(|(kind, level)| {
                    let (region, truth): (ConfidenceRegion, f64) = match kind {
                        CiKind::FunctionL2 | CiKind::FunctionL2SigmaSq => {
                            let (sel, risk) = penalized.as_ref().expect("penalized selection");
                            let scale = if *kind == CiKind::FunctionL2 { PivotScale::Sigma } else { PivotScale::SigmaSquared };
                            (inference::function_ci(sel, sigma, *level, scale)?, *risk)
                        }
                        CiKind::FunctionL2Tail => {
                            let (sel, risk) = penalized.as_ref().expect("penalized selection");
                            (inference::function_ci_tail(sel, sigma, &cfg.noise, *level)?, *risk)
                        }
                        CiKind::FunctionL2Rough => {
                            (inference::function_ci_rough(&plain, gamma_plus.expect("planned"))?, risk_plain)
                        }
                        CiKind::Energy => (inference::energy_ci(&energy, sigma, n, *level)?, h_true),
                        CiKind::EnergyFisher => {
                            if energy.h_hat <= 0.0 {
                                return Ok((false, f64::NAN, f64::NAN));
                            }
                            (inference::energy_ci_fisher(&energy, w, sigma, n, *level)?, h_true)
                        }
                    };
                    Ok((region.contains(truth), region.lower, region.upper))
                })
                .collect()
        })?;
        for (ci, (kind, level)) in cells.iter().enumerate() {
            let hits = reps.iter().filter(|r| r[ci].0).count();
            let coverage = hits as f64 / reps.len() as f64;
            let lowers: Vec<f64> = reps.iter().map(|r| r[ci].1).filter(|v| v.is_finite()).collect();
            let uppers: Vec<f64> = reps.iter().map(|r| r[ci].2).filter(|v| v.is_finite()).collect();
            rows.push(CoverageRow {
                n,
                kind: kind.label().to_string(),
                level: *level,
                coverage,
                se: stats::proportion_se(coverage, reps.len()),
                replications: reps.len(),
                mean_lower: stats::mean(&lowers),
                mean_upper: stats::mean(&uppers),
            });
        }
    }
    let checks = checks(scn, &rows);
    Ok(CoverageReport {
        scenario: cfg.scenario.clone(),
        replications: cfg.replications,
        rows,
        skipped,
        witnesses: scn.witnesses(),
        checks,
    })
}

fn checks(scn: &Scenario, rows: &[CoverageRow]) -> Vec<Check> {
    let Some(&n) = scn.config.n_grid.iter().max() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for row in rows.iter().filter(|r| r.n == n && (r.level - 0.95).abs() < 1e-12) {
        let (pass, rule) = match row.kind.as_str() {
            "function_l2" | "energy" => (row.coverage >= 0.90 && row.coverage <= 0.985, "in [0.90, 0.985]"),
            "function_l2_rough" | "function_l2_tail" => (row.coverage >= 0.95, ">= 0.95"),
            _ => continue,
        };
        out.push(Check::new(
            &format!("coverage_{}", row.kind),
            Some(pass),
            format!("coverage {:.4} (se {:.4}) at n={} {rule}", row.coverage, row.se, row.n),
        ));
    }
    out
}
