use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use specreg::basis::UniformGrid;
use specreg::error::{Error, Result};
use specreg::estimators::{self, EmpiricalSpectrum, EstimateReport, PenaltyOptions, SigmaUsed};
use specreg::harness::{self, output, Check, ExperimentConfig, Scenario};
use specreg::inference::{self, ConfidenceRegion, EnergyEstimate, EnergyTruncation, PivotScale};
use specreg::io::{fmt_f64, write_atomic, write_json};
use specreg::signal::{self, SignalSpec, SignalSpectrum};
use specreg::simulate::{self, NoiseModel, ObservationMetadata};
use specreg::spectrum::{KernelSpec, WeightSequence};

const OUT_ENV: &str = "SPECREG_OUT";
const DEFAULT_OUT: &str = "specreg-out";

const CONFIG_HELP: &str = "\
CONFIGURATION FILES (JSON)

Shared blocks:
  kernel   {\"model\": \"power_law\", \"theta\": >=0, \"scale\": >0}
           {\"model\": \"explicit\", \"values\": [w(1), w(2), ...], \"theta\": optional}
           {\"model\": \"identity\"}
  signal   {\"model\": \"power_law\", \"delta\": >1/2, \"scale\": !=0,
            \"signs\": \"all_positive\" | \"alternating\"}
           {\"model\": \"trig_poly\" | \"explicit\", \"values\": [c(1), c(2), ...]}
  noise    {\"family\": \"gaussian\"}
           {\"family\": \"subweibull\", \"q\": >0, \"tail_scale\": optional Q}
           {\"family\": \"student_t\", \"df\": >=5}
  penalty  {\"gamma_override\", \"coefficient_override\", \"big_gamma\",
            \"accept_empirical_big_gamma\"}, all optional

simulate:  signal, sigma, n, seed; optional kernel, noise
estimate / energy:
           kernel; optional sigma (number or \"estimate\"), variant
           (plain | penalized | projection | adaptive-p), truncation, p,
           penalty, pre_n, levels, energy_truncation (plain | penalized),
           gamma_plus, noise, grid
mc-* / rate-check:
           scenario, kernel, signal, sigma, n_grid (each >=16, multiple of 4),
           replications (>=1), seed; optional noise, sigma_source (known |
           estimate), variants (\"projection_fixed\", \"adaptive\", \"penalized\",
           \"plug_in\", {\"adaptive_p\": p}), outputs, penalty, levels,
           ci_kinds (function_l2, function_l2_sigma_sq, function_l2_rough,
           function_l2_tail, energy, energy_fisher), energy_truncation,
           rate_band ([lower, upper], default [-0.65, -0.35]), pre_n

Output directory: --out, else the config's \"outputs\", else $SPECREG_OUT,
else ./specreg-out.

Exit status: 0 success, 2 invalid input, 3 statistical precondition
failure (including rate-check outside its band), 1 other errors.";

#[derive(Parser)]
#[command(name = "specreg", version, about = "Adaptive spectral-cutoff deconvolution", after_long_help = CONFIG_HELP)]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Errors only.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate observations and write observations.csv with metadata.
    Simulate(SimulateArgs),
    /// Select a truncation and write the estimate.
    Estimate(EstimateArgs),
    /// Estimate the energy and its confidence intervals.
    Energy(EstimateArgs),
    /// Monte Carlo risk of each estimator variant.
    McRisk(McArgs),
    /// Monte Carlo coverage of the confidence regions.
    McCoverage(McArgs),
    /// Monte Carlo behaviour of the energy estimate.
    McEnergy(McArgs),
    /// Monte Carlo distribution of the gamma(n) plug-in.
    McGamma(McArgs),
    /// Risk experiment; exit 0 iff the fitted slope lies in the rate band.
    RateCheck(McArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(short, long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum EstimateVariant {
    Plain,
    Penalized,
    Projection,
    AdaptiveP,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum SigmaArg {
    Value(f64),
    Keyword(SigmaKeyword),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SigmaKeyword {
    Estimate,
}

impl FromStr for SigmaArg {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "estimate" {
            return Ok(SigmaArg::Keyword(SigmaKeyword::Estimate));
        }
        s.parse::<f64>()
            .map(SigmaArg::Value)
            .map_err(|_| format!("expected a number or \"estimate\", got {s:?}"))
    }
}

#[derive(Args)]
struct EstimateArgs {
    /// Observations CSV with header i,t,y.
    #[arg(long)]
    obs: PathBuf,
    /// Estimation config (JSON) with at least a kernel block.
    #[arg(short, long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    variant: Option<EstimateVariant>,
    /// Noise scale, or "estimate" for the residual estimate.
    #[arg(long)]
    sigma: Option<SigmaArg>,
    /// Cutoff for the projection variant.
    #[arg(long)]
    truncation: Option<usize>,
    /// Exponent for the adaptive-p variant.
    #[arg(long)]
    p: Option<f64>,
    /// Also write f_hat.csv on this many equispaced points.
    #[arg(long)]
    grid: Option<usize>,
    /// Also estimate the energy (always on for the energy subcommand).
    #[arg(long)]
    energy: bool,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    #[arg(short, long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    signal: SignalSpec,
    #[serde(default)]
    kernel: Option<KernelSpec>,
    #[serde(default)]
    noise: NoiseModel,
    sigma: f64,
    n: usize,
    seed: u64,
    #[serde(default)]
    outputs: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimateConfig {
    kernel: KernelSpec,
    #[serde(default)]
    sigma: Option<SigmaArg>,
    #[serde(default)]
    variant: Option<EstimateVariant>,
    #[serde(default)]
    truncation: Option<usize>,
    #[serde(default)]
    p: Option<f64>,
    #[serde(default)]
    penalty: PenaltyOptions,
    #[serde(default)]
    pre_n: Option<usize>,
    #[serde(default)]
    levels: Option<Vec<f64>>,
    #[serde(default)]
    energy_truncation: EnergyTruncation,
    /// Tail ratio for the one-sided rough region.
    #[serde(default)]
    gamma_plus: Option<f64>,
    /// Noise family for the tail-bound region.
    #[serde(default)]
    noise: Option<NoiseModel>,
    #[serde(default)]
    grid: Option<usize>,
    #[serde(default)]
    outputs: Option<PathBuf>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn out_dir(flag: Option<PathBuf>, config: Option<PathBuf>) -> PathBuf {
    flag.or(config)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn simulate_cmd(args: SimulateArgs) -> Result<()> {
    let mut cfg: SimulateConfig = read_json(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let signal = SignalSpectrum::new(cfg.signal.clone())?;
    if let Some(k) = &cfg.kernel {
        let w = WeightSequence::new(k.clone())?;
        signal::validate_pairing(&signal, &w)?;
    }
    cfg.noise.validate()?;
    let grid = UniformGrid::new(cfg.n)?;
    let g = simulate::forward(&signal, grid)?;
    let obs = simulate::observe(&g, cfg.sigma, &cfg.noise, cfg.seed)?;
    let obs = obs.clone().with_provenance(ObservationMetadata {
        signal: Some(cfg.signal.clone()),
        kernel: cfg.kernel.clone(),
        ..obs.metadata()
    });
    let dir = out_dir(args.out, cfg.outputs.clone());
    simulate::write_observations_csv(&dir.join("observations.csv"), &obs)?;
    simulate::write_metadata_json(&dir.join("observations.json"), &obs)?;
    write_json(&dir.join("config.json"), &cfg)?;
    log::info!("wrote {} observations to {}", cfg.n, dir.display());
    Ok(())
}

#[derive(Serialize)]
struct EstimateOutput<'a> {
    variant: EstimateVariant,
    report: &'a EstimateReport,
    summary: Option<estimators::SelectionSummary>,
    sigma_used: Option<SigmaUsed>,
}

#[derive(Serialize)]
struct EnergyOutput {
    estimate: EnergyEstimate,
    regions: Vec<ConfidenceRegion>,
    /// Constructions not produced, with the reason.
    skipped: Vec<(String, String)>,
}

fn estimate_cmd(args: EstimateArgs, force_energy: bool) -> Result<()> {
    let mut cfg: EstimateConfig = read_json(&args.config)?;
    let obs = simulate::read_observations_csv(&args.obs)?;
    let weights = WeightSequence::new(cfg.kernel.clone())?;
    let variant = args.variant.or(cfg.variant).unwrap_or(EstimateVariant::Plain);
    let sigma_arg = args.sigma.or(cfg.sigma).unwrap_or(SigmaArg::Keyword(SigmaKeyword::Estimate));
    let sigma = match sigma_arg {
        SigmaArg::Value(v) => SigmaUsed::known(v)?,
        SigmaArg::Keyword(SigmaKeyword::Estimate) => SigmaUsed::estimated(&obs, cfg.pre_n)?,
    };
    if let Some(g) = args.grid {
        cfg.grid = Some(g);
    }
    let spec = EmpiricalSpectrum::new(&obs);

    let mut report = match variant {
        EstimateVariant::Projection => {
            let n = args.truncation.or(cfg.truncation).ok_or_else(|| {
                Error::Config {
                    field: "truncation".into(),
                    message: "the projection variant needs a truncation".into(),
                }
            })?;
            estimators::projection_estimate(&obs, &weights, n)?
        }
        EstimateVariant::Plain => spec.report(&weights, spec.select_adaptive(&weights)?)?,
        EstimateVariant::Penalized => spec.report(&weights, spec.select_penalized(&weights, sigma, &cfg.penalty)?)?,
        EstimateVariant::AdaptiveP => {
            let p = args.p.or(cfg.p).ok_or_else(|| Error::Config {
                field: "p".into(),
                message: "the adaptive-p variant needs an exponent".into(),
            })?;
            spec.report(&weights, spec.select_adaptive_p(&weights, p)?)?
        }
    };
    report.sigma_used = Some(sigma);

    let dir = out_dir(args.out, cfg.outputs.clone());
    write_json(
        &dir.join("estimate.json"),
        &EstimateOutput {
            variant,
            report: &report,
            summary: report.selection.as_ref().map(|s| s.summary()),
            sigma_used: Some(sigma),
        },
    )?;
    if let Some(sel) = &report.selection {
        sel.write_diagnostics_csv(&dir.join("selection.csv"))?;
        sel.write_summary_json(&dir.join("selection_summary.json"))?;
    }
    if let Some(k) = cfg.grid {
        if k == 0 {
            return Err(Error::Config {
                field: "grid".into(),
                message: "must be >= 1".into(),
            });
        }
        write_atomic(&dir.join("f_hat.csv"), |w| {
            writeln!(w, "t,f_hat")?;
            for j in 1..=k {
                let t = j as f64 / k as f64;
                writeln!(w, "{},{}", fmt_f64(t), fmt_f64(report.evaluate(t)))?;
            }
            Ok(())
        })?;
    }

    if force_energy || args.energy {
        let out = energy_regions(&cfg, &spec, &weights, &report, sigma)?;
        write_json(&dir.join("energy.json"), &out)?;
        log::info!("H_hat = {} with M = {}", out.estimate.h_hat, out.estimate.m_used);
    }
    log::info!("selected truncation {} ({:?}); outputs in {}", report.truncation, variant, dir.display());
    Ok(())
}

fn energy_regions(
    cfg: &EstimateConfig,
    spec: &EmpiricalSpectrum,
    weights: &WeightSequence,
    report: &EstimateReport,
    sigma: SigmaUsed,
) -> Result<EnergyOutput> {
    let n = spec.n();
    let m = match &report.selection {
        Some(sel) => inference::energy_cutoff(sel, cfg.energy_truncation)?,
        None => report.truncation,
    };
    let estimate = inference::energy_at(spec, weights, m, sigma.value)?;
    let levels = cfg.levels.clone().unwrap_or_else(|| vec![0.95]);
    let mut regions = Vec::new();
    let mut skipped = Vec::new();
    for &level in &levels {
        regions.push(inference::energy_ci(&estimate, sigma.value, n, level)?);
        if weights.is_identity() {
            match inference::energy_ci_fisher(&estimate, weights, sigma.value, n, level) {
                Ok(r) => regions.push(r),
                Err(e) => skipped.push(("energy_fisher".into(), e.to_string())),
            }
        }
        if let Some(sel) = report.selection.as_ref().filter(|s| s.variant == estimators::Variant::Penalized) {
            regions.push(inference::function_ci(sel, sigma.value, level, PivotScale::Sigma)?);
            regions.push(inference::function_ci(sel, sigma.value, level, PivotScale::SigmaSquared)?);
            if let Some(noise) = &cfg.noise {
                match inference::function_ci_tail(sel, sigma.value, noise, level) {
                    Ok(r) => regions.push(r),
                    Err(e) => skipped.push(("function_l2_tail".into(), e.to_string())),
                }
            }
        }
    }
    if !weights.is_identity() {
        skipped.push(("energy_fisher".into(), "identity kernel only".into()));
    }
    match (&report.selection, cfg.gamma_plus) {
        (Some(sel), Some(gp)) => regions.push(inference::function_ci_rough(sel, gp)?),
        (Some(_), None) => skipped.push(("function_l2_rough".into(), "needs gamma_plus in the config".into())),
        _ => {}
    }
    Ok(EnergyOutput {
        estimate,
        regions,
        skipped,
    })
}

#[derive(Clone, Copy, PartialEq)]
enum Experiment {
    Risk,
    Coverage,
    Energy,
    Gamma,
    RateCheck,
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        let status = match c.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        println!("{status} {}: {}", c.name, c.detail);
    }
}

fn mc_cmd(args: McArgs, which: Experiment) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(r) = args.replications {
        cfg.replications = r;
    }
    let scn: Scenario = cfg.resolve()?;
    if cfg.replications < 2 {
        log::warn!("a single replication gives no spread estimates; statistics are marked unreliable");
    }
    let dir = out_dir(args.out, cfg.outputs.clone());
    match which {
        Experiment::Risk | Experiment::RateCheck => {
            if which == Experiment::RateCheck {
                scn.validate_rate()?;
                if cfg.n_grid.len() < 2 {
                    return Err(Error::Config {
                        field: "n_grid".into(),
                        message: "a rate fit needs at least two sample sizes".into(),
                    });
                }
            }
            if let Some(w) = scn.rate_condition_warning() {
                log::warn!("{w}");
            }
            let report = harness::run_risk_experiment(&scn)?;
            output::write_risk(&dir, &cfg, &report)?;
            print_checks(&report.checks);
            if which == Experiment::RateCheck {
                return match report.rate_check() {
                    Some(true) => Ok(()),
                    Some(false) => Err(Error::Precondition("fitted slope lies outside the rate band".into())),
                    None => Err(Error::Precondition("no slope was fitted (noise-free scenario or zero risk)".into())),
                };
            }
        }
        Experiment::Coverage => {
            let report = harness::run_coverage_experiment(&scn)?;
            output::write_coverage(&dir, &cfg, &report)?;
            print_checks(&report.checks);
        }
        Experiment::Energy => {
            let report = harness::run_energy_experiment(&scn)?;
            output::write_energy(&dir, &cfg, &report)?;
            print_checks(&report.checks);
        }
        Experiment::Gamma => {
            let report = harness::run_gamma_experiment(&scn)?;
            output::write_gamma(&dir, &cfg, &report)?;
            print_checks(&report.checks);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else {
        match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        }
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    let result = match cli.command {
        Command::Simulate(a) => simulate_cmd(a),
        Command::Estimate(a) => estimate_cmd(a, false),
        Command::Energy(a) => estimate_cmd(a, true),
        Command::McRisk(a) => mc_cmd(a, Experiment::Risk),
        Command::McCoverage(a) => mc_cmd(a, Experiment::Coverage),
        Command::McEnergy(a) => mc_cmd(a, Experiment::Energy),
        Command::McGamma(a) => mc_cmd(a, Experiment::Gamma),
        Command::RateCheck(a) => mc_cmd(a, Experiment::RateCheck),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
