//! Experiment output files: one CSV per experiment, `summary.json` with the
//! checks, and `config.json` echoing the resolved configuration.

use std::path::Path;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::coverage::CoverageReport;
use super::energy::EnergyReport;
use super::gamma::GammaReport;
use super::risk::RiskReport;
use super::{Check, Witnesses};
use crate::error::Result;
use crate::io::{fmt_f64, fmt_opt, write_atomic, write_json};

pub const RISK_HEADER: &str = "n,variant,mean_risk,se,a_star,ratio,mean_M,mean_gamma_hat,clamp_rate";
pub const ENERGY_HEADER: &str = "n,replications,mean_M,h_true,mean_h_hat,n_mse,n_mse_se,target,ratio,z_mean,z_var,fisher_mean,fisher_var,fisher_nonpositive,s2_witness,rho_witness";
pub const COVERAGE_HEADER: &str = "n,kind,level,coverage,se,replications,mean_lower,mean_upper";
pub const GAMMA_HEADER: &str = "n,G,replications,gamma_analytic,median_raw,q25_raw,q75_raw,mean_clamped,nonfinite,abs_error_median";

#[derive(Debug, Clone, Serialize)]
pub struct Summary<'a, D: Serialize> {
    pub experiment: &'a str,
    pub scenario: &'a str,
    pub replications: usize,
    /// Set when a single replication makes every spread estimate meaningless.
    pub unreliable: bool,
    pub witnesses: &'a Witnesses,
    pub checks: &'a [Check],
    /// True when no applicable check failed.
    pub all_pass: bool,
    pub details: D,
}

fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass != Some(false))
}

fn write_summary<D: Serialize>(
    dir: &Path,
    experiment: &str,
    cfg: &ExperimentConfig,
    witnesses: &Witnesses,
    checks: &[Check],
    details: D,
) -> Result<()> {
    write_json(
        &dir.join("summary.json"),
        &Summary {
            experiment,
            scenario: &cfg.scenario,
            replications: cfg.replications,
            unreliable: cfg.replications < 2,
            witnesses,
            checks,
            all_pass: all_pass(checks),
            details,
        },
    )?;
    write_json(&dir.join("config.json"), cfg)
}

pub fn write_risk(dir: &Path, cfg: &ExperimentConfig, report: &RiskReport) -> Result<()> {
    write_atomic(&dir.join("risk.csv"), |w| {
        writeln!(w, "{RISK_HEADER}")?;
        for r in &report.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.n,
                r.variant,
                fmt_f64(r.mean_risk),
                fmt_f64(r.se),
                fmt_f64(r.a_star),
                fmt_f64(r.ratio),
                fmt_f64(r.mean_m),
                fmt_opt(r.mean_gamma_hat),
                fmt_opt(r.clamp_rate)
            )?;
        }
        Ok(())
    })?;
    #[derive(Serialize)]
    struct Details<'a> {
        slopes: &'a [super::risk::SlopeFit],
        theoretical_slope: Option<f64>,
        rate_variant: Option<&'a str>,
        rate_band: [f64; 2],
        per_n: &'a [super::risk::RiskDiagnostics],
    }
    write_summary(
        dir,
        "risk",
        cfg,
        &report.witnesses,
        &report.checks,
        Details {
            slopes: &report.slopes,
            theoretical_slope: report.theoretical_slope,
            rate_variant: report.rate_variant.as_deref(),
            rate_band: cfg.rate_band,
            per_n: &report.diagnostics,
        },
    )
}

pub fn write_energy(dir: &Path, cfg: &ExperimentConfig, report: &EnergyReport) -> Result<()> {
    write_atomic(&dir.join("energy.csv"), |w| {
        writeln!(w, "{ENERGY_HEADER}")?;
        for r in &report.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.n,
                r.replications,
                fmt_f64(r.mean_m),
                fmt_f64(r.h_true),
                fmt_f64(r.mean_h_hat),
                fmt_f64(r.n_mse),
                fmt_f64(r.n_mse_se),
                fmt_f64(r.target),
                fmt_opt(r.ratio),
                fmt_opt(r.z_mean),
                fmt_opt(r.z_var),
                fmt_opt(r.fisher_mean),
                fmt_opt(r.fisher_var),
                r.fisher_nonpositive.map(|v| v.to_string()).unwrap_or_default(),
                fmt_f64(r.s2_witness),
                fmt_f64(r.rho_witness)
            )?;
        }
        Ok(())
    })?;
    write_summary(dir, "energy", cfg, &report.witnesses, &report.checks, ())
}

pub fn write_coverage(dir: &Path, cfg: &ExperimentConfig, report: &CoverageReport) -> Result<()> {
    write_atomic(&dir.join("coverage.csv"), |w| {
        writeln!(w, "{COVERAGE_HEADER}")?;
        for r in &report.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.n,
                r.kind,
                fmt_f64(r.level),
                fmt_f64(r.coverage),
                fmt_f64(r.se),
                r.replications,
                fmt_f64(r.mean_lower),
                fmt_f64(r.mean_upper)
            )?;
        }
        Ok(())
    })?;
    #[derive(Serialize)]
    struct Details<'a> {
        skipped: &'a [(String, String)],
    }
    write_summary(
        dir,
        "coverage",
        cfg,
        &report.witnesses,
        &report.checks,
        Details { skipped: &report.skipped },
    )
}

pub fn write_gamma(dir: &Path, cfg: &ExperimentConfig, report: &GammaReport) -> Result<()> {
    write_atomic(&dir.join("gamma.csv"), |w| {
        writeln!(w, "{GAMMA_HEADER}")?;
        for r in &report.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.n,
                r.g,
                r.replications,
                fmt_opt(r.gamma_analytic),
                fmt_opt(r.median_raw),
                fmt_opt(r.q25_raw),
                fmt_opt(r.q75_raw),
                fmt_f64(r.mean_clamped),
                r.nonfinite,
                fmt_opt(r.abs_error_median)
            )?;
        }
        Ok(())
    })?;
    #[derive(Serialize)]
    struct Details {
        applicable: bool,
    }
    write_summary(
        dir,
        "gamma",
        cfg,
        &report.witnesses,
        &report.checks,
        Details { applicable: report.applicable },
    )
}
